import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from rmtlab import plotting
from rmtlab.cli import EXIT_CONFIG, EXIT_OK, main
from rmtlab.config import ConfigError, RunConfig, load_config
from rmtlab.ensembles import read_matrix
from rmtlab.parallel import default_threads
from rmtlab.reports import read_csv

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def small_density(tmp_path, name="cfg.json", **extra):
    doc = {"schema": "rmtlab/1", "experiment": "density",
           "ensemble": {"N": 300, "alpha": 1.5, "seed": 12}, "trials": 1, "checks": False,
           "params": {"n_E": 11, "bins": 20}}
    doc.update(extra)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_selftest_subprocess():
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "rmtlab.cli", "selftest"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert time.perf_counter() - start < 60
    assert "selftest: pass" in proc.stdout
    assert "[FAIL]" not in proc.stdout


def test_invalid_nu_exit_2(capsys):
    assert main(["validate", os.path.join(CONFIGS, "invalid_nu.json")]) == EXIT_CONFIG
    assert "1/(4−α) < ν" in capsys.readouterr().err


def test_shipped_configs_validate(capsys):
    for name in sorted(os.listdir(CONFIGS)):
        if name == "invalid_nu.json":
            continue
        assert main(["validate", os.path.join(CONFIGS, name)]) == EXIT_OK, name
    assert "valid" in capsys.readouterr().out


@pytest.mark.parametrize("doc", [
    {"schema": "rmtlab/1", "experiment": "density", "ensemble": {"N": 10, "alpha": 1.5}, "bogus": 1},
    {"schema": "rmtlab/1", "experiment": "density", "ensemble": {"N": 10, "alpha": 1.5, "extra": 2}},
    {"schema": "rmtlab/1", "experiment": "density", "ensemble": {"N": 10, "alpha": 1.5},
     "params": {"ks_max": 0.1}},
    {"schema": "rmtlab/2", "experiment": "density", "ensemble": {"N": 10, "alpha": 1.5}},
    {"schema": "rmtlab/1", "experiment": "nope"},
    {"schema": "rmtlab/1", "experiment": "density"},
    {"schema": "rmtlab/1", "experiment": "density", "ensemble": {"N": 99999, "alpha": 1.5}},
])
def test_config_rejections(tmp_path, doc):
    with pytest.raises(ConfigError):
        RunConfig(doc)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["run", str(p), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_unreadable_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["validate", str(p)]) == EXIT_CONFIG


def test_density_run_artifacts(tmp_path):
    cfg = small_density(tmp_path)
    out = tmp_path / "run"
    assert main(["run", cfg, "--out", str(out), "--dump", "--threads", "2"]) == EXIT_OK
    header, rows = read_csv(out / "density.csv")
    assert header == ["E", "rho_alpha", "im_m", "residual"]
    E = np.array([float(r[0]) for r in rows])
    assert np.all(np.diff(E) > 0)
    assert (out / "density.svg").read_text().startswith("<?xml")
    man = json.loads((out / "manifest.json").read_text())
    assert man["config_text"] == open(cfg).read()
    assert man["seed"] == 12
    assert set(man["files"]) >= {"density", "esd", "density_plot", "matrix_H", "matrix_X"}
    assert len(man["content_hash"]) == 64
    H = read_matrix(out / "H_trial0.bin")
    assert H.shape == (300, 300) and np.allclose(H, H.T)
    raw = (out / "density.csv").read_bytes()
    assert b"\r\n" in raw


def test_end_to_end_determinism(tmp_path):
    cfg = small_density(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a), "--threads", "1"]) == EXIT_OK
    assert main(["run", cfg, "--out", str(b), "--threads", "3"]) == EXIT_OK
    for name in ("density.csv", "esd.csv", "density.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_failing_check_exit_1(tmp_path):
    cfg = small_density(tmp_path, checks=True, params={"n_E": 11, "bins": 20, "esd_l1_max": 1e-9})
    assert main(["run", cfg, "--out", str(tmp_path / "f")]) == 1
    man = json.loads((tmp_path / "f" / "manifest.json").read_text())
    assert man["status"] == "fail"


def test_threads_env(monkeypatch):
    monkeypatch.setenv("RMT_THREADS", "3")
    assert default_threads() == 3
    monkeypatch.setenv("RMT_THREADS", "zero")
    with pytest.raises(ValueError):
        default_threads()
    monkeypatch.delenv("RMT_THREADS")
    assert default_threads() >= 1


def test_threads_flag_rejects_zero(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", small_density(tmp_path), "--threads", "0"])


def test_svg_determinism_and_wigner_path(tmp_path):
    s = np.random.default_rng(0).exponential(size=500)
    p1 = plotting.emit_svg({"spacings": s}, "spacing", tmp_path / "a.svg")
    p2 = plotting.emit_svg({"spacings": s}, "spacing", tmp_path / "b.svg")
    data = open(p1, "rb").read()
    assert data == open(p2, "rb").read()
    assert b'id="wigner-surmise"' in data


def test_svg_empty_rejected(tmp_path):
    with pytest.raises(ValueError):
        plotting.emit_svg({}, "density", tmp_path / "x.svg")
    with pytest.raises(ValueError):
        plotting.emit_svg({"spacings": np.array([])}, "spacing", tmp_path / "x.svg")
    with pytest.raises(ValueError):
        plotting.emit_svg({"x": [1]}, "pie", tmp_path / "x.svg")


def test_other_plot_kinds(tmp_path):
    plotting.emit_svg({"energies": [0, 1], "etas": [0.1, 0.2], "values": np.ones((2, 2))}, "heatmap",
                      tmp_path / "h.svg")
    plotting.emit_svg({"x": [0, 1], "y": [1, 2], "bound": 3}, "scatter", tmp_path / "s.svg")
    plotting.emit_svg({"E": [0, 1], "rho": [0.2, 0.1]}, "density", tmp_path / "d.svg")
    assert all((tmp_path / n).stat().st_size > 0 for n in ("h.svg", "s.svg", "d.svg"))
