import io
import json
import subprocess
import sys

import pytest

from finslergeo import cli
from finslergeo.errors import ConfigError


def _scenario(tmp_path, cfg, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return p


CHECK_EUCLID = {
    "version": 1, "task": "check-metric", "metric": {"kind": "euclidean", "dim": 2},
    "parameters": {"samples": 50, "seed": 7,
                   "tolerances": {"homogeneity": 1e-12, "gww": 1e-12}},
    "name": "euclid_check",
}


def test_run_scenario_exit_zero(tmp_path):
    path = _scenario(tmp_path, CHECK_EUCLID)
    code = cli.run_scenario(path, out_dir=tmp_path / "out", stream=io.StringIO())
    assert code == 0
    assert (tmp_path / "out" / "euclid_check.csv").exists()


def test_csv_determinism(tmp_path):
    cfg = {
        "version": 1, "task": "condition-matrix",
        "metric": {"kind": "randers", "dim": 2,
                   "beta": ["0.35 + 0.2*sin(x2)", "0.2*cos(x1)"]},
        "parameters": {"samples": 8, "seed": 3}, "name": "cm",
    }
    path = _scenario(tmp_path, cfg)
    for d in ("a", "b"):
        cli.run_scenario(path, out_dir=tmp_path / d, stream=io.StringIO())
    assert (tmp_path / "a" / "cm.csv").read_bytes() == (tmp_path / "b" / "cm.csv").read_bytes()


def test_worker_fanout_deterministic(tmp_path, monkeypatch):
    cfg = {
        "version": 1, "task": "condition-matrix",
        "metric": {"kind": "funk", "dim": 2},
        "parameters": {"samples": 6, "seed": 5}, "name": "cmw",
    }
    path = _scenario(tmp_path, cfg)
    cli.run_scenario(path, out_dir=tmp_path / "serial", stream=io.StringIO())
    monkeypatch.setenv("FINSLERGEO_WORKERS", "3")
    cli.run_scenario(path, out_dir=tmp_path / "pooled", stream=io.StringIO())
    assert (tmp_path / "serial" / "cmw.csv").read_bytes() == \
        (tmp_path / "pooled" / "cmw.csv").read_bytes()


def test_config_error_no_artifacts(tmp_path):
    bad = dict(CHECK_EUCLID)
    bad["task"] = "not-a-task"
    path = _scenario(tmp_path, bad)
    out = tmp_path / "out"
    with pytest.raises(ConfigError):
        cli.run_scenario(path, out_dir=out, stream=io.StringIO())
    assert not out.exists()


def test_version_field_required(tmp_path):
    bad = dict(CHECK_EUCLID)
    bad.pop("version")
    with pytest.raises(ConfigError):
        cli.run_scenario(_scenario(tmp_path, bad), stream=io.StringIO())


def test_expression_rejects_unsafe_constructs():
    with pytest.raises(ConfigError):
        cli.compile_expression("__import__('os').system('true')", 2)
    with pytest.raises(ConfigError):
        cli.compile_expression("x1.__class__", 2)
    with pytest.raises(ConfigError):
        cli.compile_expression("unknown_fn(x1)", 2)
    rule = cli.compile_expression("sqrt(y1*y1 + y2*y2) + 0.3*y1", 2)
    assert rule([0.0, 0.0], [3.0, 4.0]) == pytest.approx(5.9)


def test_custom_metric_expression_pipeline(tmp_path):
    cfg = {
        "version": 1, "task": "check-metric",
        "metric": {"kind": "custom", "dim": 2, "name": "expr_randers",
                   "f2": "(sqrt(y1*y1 + y2*y2) + 0.3*y1)**2"},
        "parameters": {"samples": 40, "seed": 2,
                       "tolerances": {"homogeneity": 1e-10, "gww": 1e-10}},
        "name": "custom_expr",
    }
    code = cli.run_scenario(_scenario(tmp_path, cfg), stream=io.StringIO())
    assert code == 0


def test_residual_failure_exit_two(tmp_path):
    cfg = {
        "version": 1, "task": "curvature-sweep", "metric": {"kind": "funk", "dim": 2},
        "parameters": {"flags": 5, "seed": 1, "expect_value": -0.3,
                       "tolerance": 1e-6},  # wrong expected curvature
        "name": "wrong",
    }
    code = cli.run_scenario(_scenario(tmp_path, cfg), stream=io.StringIO())
    assert code == 2


def test_invalid_metric_reports_exit_one(tmp_path):
    cfg = {
        "version": 1, "task": "check-metric",
        "metric": {"kind": "randers", "dim": 2, "beta": [1.2, 0.0]},
        "parameters": {"samples": 30, "seed": 4}, "name": "invalid_randers",
    }
    code = cli.run_scenario(_scenario(tmp_path, cfg), stream=io.StringIO())
    assert code == 2  # PD failures reported, not thrown


def test_geodesic_subcommand_stdout(capsys):
    rc = cli.main(["geodesic", "--metric", "euclidean", "--x0", "0,0",
                   "--y0", "1,0", "--t", "1.0", "--nodes", "11"])
    assert rc == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[0] == "t,x1,x2,y1,y2"
    last = [float(v) for v in out[-1].split(",")]
    assert last[0] == pytest.approx(1.0)
    assert last[1] == pytest.approx(1.0)


def test_minkowski_condition_scenario_passes():
    cfgs = dict(cli.bundled_scenarios())
    cfg = dict(cfgs["05_condition_matrix_minkowski.json"])
    cfg["name"] = "mink"
    assert cli.run_scenario_config(cfg, stream=io.StringIO()) == 0


def test_seed_variation_stable_pass_pattern(tmp_path):
    cfg = {
        "version": 1, "task": "condition-matrix",
        "metric": {"kind": "randers", "dim": 2,
                   "beta": ["0.35 + 0.2*sin(x2)", "0.2*cos(x1)"]},
        "parameters": {"samples": 6, "seed": 0, "tolerance": 1e-7,
                       "expect": {"berwald": ["T3", "M5"], "cartan": ["T2", "M6", "M7"]},
                       "expect_fail": {"berwald": {"M6": 1e-3}}},
        "name": "seeds",
    }
    path = _scenario(tmp_path, cfg)
    codes = {cli.run_scenario(path, seed_override=s, stream=io.StringIO())
             for s in (1, 2, 3)}
    assert codes == {0}


def test_mutation_sign_flip_fails_jacobi(monkeypatch):
    """Injected-fault smoke test: a sign-flipped curvature must break the
    Jacobi comparison."""
    import finslergeo.variational as variational
    from finslergeo.spray import PointFrame

    class FlippedFrame(PointFrame):
        @property
        def R(self):
            return -super().R

    monkeypatch.setattr(variational, "PointFrame", FlippedFrame)
    cfg = {
        "version": 1, "task": "jacobi-compare",
        "metric": {"kind": "sphere_stereographic", "dim": 2},
        "parameters": {"samples": 2, "seed": 53, "tolerance": 1e-3},
        "name": "mutated",
    }
    assert cli.run_scenario_config(cfg, stream=io.StringIO()) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "finslergeo.cli", "run", "missing.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "configuration error" in proc.stderr
