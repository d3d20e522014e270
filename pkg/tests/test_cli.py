import json
import subprocess
import sys

import pytest

from deffuant_lab.cli import main

CFG = {"lattice": {"n": 60, "boundary": "cycle"},
       "dynamics": {"theta": "0.5", "mu": "0.5", "t_max": 20, "seed": 3, "record_events": True},
       "metric": {"kind": "euclidean"},
       "distribution": {"kind": "uniform_box", "lo": [0], "hi": [1]},
       "sweep": {"theta_grid": [0.3, 0.6], "trials": 3}}


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CFG))
    return p


def test_simulate(cfg, tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("results.csv", "summary.json", "events.csv"):
        assert (out / name).exists()
    s1 = json.loads((out / "summary.json").read_text())
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert json.loads((tmp_path / "b" / "summary.json").read_text()) == s1


def test_sweep_predict_dtheta_sad(cfg, tmp_path):
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "sw")]) == 0
    assert (tmp_path / "sw" / "results.csv").exists()
    assert main(["predict", "--config", str(cfg), "--out", str(tmp_path / "pr")]) == 0
    pr = json.loads((tmp_path / "pr" / "summary.json").read_text())
    assert abs(pr["theta_c"] - 0.5) < 1e-3
    assert main(["dtheta", "--config", str(cfg), "--discretization", "50",
                 "--out", str(tmp_path / "dt")]) == 0
    assert (tmp_path / "dt" / "timeline.csv").read_text().startswith("threshold,components_after")
    assert main(["sad-check", "--config", str(cfg), "--out", str(tmp_path / "sad")]) == 0
    sad = json.loads((tmp_path / "sad" / "summary.json").read_text())
    assert sad["max_abs_error"] <= 1e-8
    assert (tmp_path / "sad" / "weights.csv").exists()


def test_metric_check(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"metric": {"kind": "lp_pow", "p": 0.5}}))
    assert main(["metric-check", "--config", str(p), "--samples", "20000",
                 "--out", str(tmp_path / "mc")]) == 0
    s = json.loads((tmp_path / "mc" / "summary.json").read_text())
    assert s["weak_convexity"].startswith("counterexample")


def test_scenario(tmp_path):
    assert main(["scenario", "figure1", "--out", str(tmp_path / "f1")]) == 0
    s = json.loads((tmp_path / "f1" / "summary.json").read_text())
    assert s["timeline"]["component_counts"] == [4, 2, 1]
    assert (tmp_path / "f1" / "provenance.md").exists()


def test_exit_codes(tmp_path, cfg):
    bad = tmp_path / "bad.json"
    bad.write_text('{"lattice": {"n": 1}}')
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["predict", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["scenario", "nope", "--out", str(tmp_path / "x")]) == 2
    disc = tmp_path / "disc.json"
    disc.write_text(json.dumps({**CFG, "metric": {"kind": "discrete"}}))
    assert main(["predict", "--config", str(disc)]) == 3
    assert main(["dtheta", "--config", str(disc)]) == 3


def test_module_entry_point(cfg, tmp_path):
    r = subprocess.run([sys.executable, "-m", "deffuant_lab", "predict", "--config", str(cfg),
                        "--out", str(tmp_path / "m")], capture_output=True, text=True)
    assert r.returncode == 0 and "theta_c" in r.stdout
