"""CSV tables, run manifests and acceptance-check records."""

from __future__ import annotations

import csv
import hashlib
import json
import numbers
from dataclasses import dataclass

import numpy as np


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, numbers.Integral):
        return str(int(v))
    if isinstance(v, numbers.Real):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, header, rows):
    """RFC-4180 CSV (CRLF line ends, minimal quoting) with 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError("row length does not match header")
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.value:.6g} (need {self.threshold})"

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "threshold": self.threshold}


def content_hash(config_text: str, version: str) -> str:
    h = hashlib.sha256()
    h.update(version.encode())
    h.update(b"\0")
    h.update(config_text.encode("utf-8"))
    return h.hexdigest()


def write_manifest(path, config_raw, config_text, seed, files, wall_time, checks, version, status):
    doc = {
        "config": config_raw,
        "config_text": config_text,
        "seed": seed,
        "content_hash": content_hash(config_text, version),
        "files": files,
        "wall_time_seconds": wall_time,
        "checks": [c.to_dict() for c in checks],
        "status": status,
        "version": version,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path
