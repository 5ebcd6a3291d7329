"""Counter-based random streams.

Every stream is a Philox generator whose key is derived from
``(seed, *labels)`` through :class:`numpy.random.SeedSequence`, so a trial's
draws depend only on its labels and never on scheduling order.
"""

from __future__ import annotations

import zlib

import numpy as np

PURPOSES = ("entries", "goe", "rows", "t", "misc", "stable", "laplace", "gamma")


def _label(x):
    if isinstance(x, str):
        return zlib.crc32(x.encode())
    return int(x)


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``(seed, *labels)``; labels are ints or strings."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1),
                                spawn_key=tuple(_label(x) for x in labels))
    return np.random.Generator(np.random.Philox(ss))


def trial_stream(seed: int, trial: int, purpose: str = "entries") -> np.random.Generator:
    return stream(seed, trial, purpose)
