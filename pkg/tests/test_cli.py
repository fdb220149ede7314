import json
import subprocess
import sys

import numpy as np
import pytest

from togl.cli import main
from togl.dictionary import gaussian_kernel, packing_centers

TINY = {"m_train": 80, "m_test": 60, "n_atoms": 30, "trials": 1, "sigmas": [0.1], "k_max": 6,
        "methods": ["OGL1", "OGLR"]}


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_fit_toy_high_threshold(tmp_path, capsys):
    data = tmp_path / "toy.csv"
    data.write_text("x,y\n0,3\n1,1\n")
    conf = _write(tmp_path / "c.json", {"delta": 0.95})
    with pytest.warns(UserWarning):
        code = main(["fit", "--config", str(conf), "--data", str(data), "--out", str(tmp_path)])
    assert code == 0
    est = json.loads((tmp_path / "estimator.json").read_text())
    assert est["k_final"] == 0 and est["termination_reason"] == "NoActiveAtom"
    assert "k_final: 0" in capsys.readouterr().out


def test_fit_representable_target(tmp_path, capsys):
    centers = packing_centers(20, -3.0, 3.0)
    xs = np.linspace(-3, 3, 50)
    ys = gaussian_kernel(xs, centers[[3, 12]], 1.0) @ np.array([0.7, -0.4])
    data = tmp_path / "rep.csv"
    data.write_text("x,y\n" + "".join(f"{float(x)!r},{float(y)!r}\n" for x, y in zip(xs, ys)))
    conf = _write(tmp_path / "c.json", {"n_atoms": 20, "domain": [-3.0, 3.0], "delta": 1e-6,
                                        "truncation_M": 10.0})
    assert main(["fit", "--config", str(conf), "--data", str(data), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    train_rmse = float(out.split("train_rmse: ")[1].split()[0])
    assert train_rmse < 1e-8


def test_exit_codes(tmp_path):
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n1,abc\n")
    assert main(["fit", "--data", str(bad), "--out", str(tmp_path)]) == 3
    conf = _write(tmp_path / "c.json", {"colour": "blue"})
    assert main(["ogl-compare", "--config", str(conf), "--out", str(tmp_path)]) == 2
    (tmp_path / "broken.json").write_text("{")
    assert main(["ogl-compare", "--config", str(tmp_path / "broken.json")]) == 2
    assert main(["ogl-compare", "--config", str(tmp_path / "none.json")]) == 2
    dup = tmp_path / "dup.csv"
    dup.write_text("x,y\n0,1\n0,1\n")
    conf = _write(tmp_path / "r.json", {"method": "ridge", "lam": 0.0, "n_atoms": 5})
    assert main(["fit", "--config", str(conf), "--data", str(dup), "--out", str(tmp_path)]) == 4


def test_fit_requires_method_parameter(tmp_path):
    data = tmp_path / "toy.csv"
    data.write_text("x,y\n0,3\n1,1\n")
    conf = _write(tmp_path / "c.json", {"method": "OGL1"})
    assert main(["fit", "--config", str(conf), "--data", str(data), "--out", str(tmp_path)]) == 2


def test_runs_are_byte_identical(tmp_path):
    conf = _write(tmp_path / "c.json", TINY)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["ogl-compare", "--config", str(conf), "--out", str(a)]) == 0
    assert main(["ogl-compare", "--config", str(conf), "--out", str(b)]) == 0
    for name in ("ogl_summary.csv", "ogl_curves.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "ogl_summary.csv").read_text().splitlines()[0]
    assert header == "method,sigma,best_param,test_rmse_mean,test_rmse_std,k_star,sparsity"


def test_seed_flag_and_env_workers(tmp_path, monkeypatch):
    conf = _write(tmp_path / "c.json", TINY)
    monkeypatch.setenv("GREEDY_DICT_WORKERS", "2")
    assert main(["ogl-compare", "--config", str(conf), "--out", str(tmp_path / "w"),
                 "--seed", "5"]) == 0
    man = json.loads((tmp_path / "w" / "manifest.json").read_text())
    assert man["master_seed"] == 5 and man["config"]["workers"] == 2
    monkeypatch.delenv("GREEDY_DICT_WORKERS")
    assert main(["ogl-compare", "--config", str(conf), "--out", str(tmp_path / "s"),
                 "--seed", "5"]) == 0
    assert (tmp_path / "w" / "ogl_summary.csv").read_bytes() == \
        (tmp_path / "s" / "ogl_summary.csv").read_bytes()


def test_module_entry_point(tmp_path):
    conf = _write(tmp_path / "c.json", TINY)
    proc = subprocess.run([sys.executable, "-m", "togl.cli", "ogl-compare", "--config", str(conf),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "ogl_summary.csv").exists()
