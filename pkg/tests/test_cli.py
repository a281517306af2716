import json

import pytest

from wiener_projection.cli import main
from wiener_projection.config import ConfigError, load_config

BASE = {"horizon": 1.0, "n": 100, "ensemble": {"M": 500, "seed": 3}}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg), encoding="utf-8")
    return p


def run(tmp_path, command, cfg, *extra):
    out = tmp_path / "out"
    return main([command, "--config", str(write(tmp_path, cfg)), "--out", str(out), *extra]), out


def test_solve_outputs(tmp_path):
    cfg = {**BASE, "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [1]]}}}
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    csv = (out / "solution.csv").read_bytes()
    assert csv.startswith(b"t,q,qdot\n") and b"\r" not in csv
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert report["action"] == pytest.approx(0.25, abs=1e-12)
    assert {"audit", "kl_estimate", "config", "el_residual_max"} <= set(report)
    text = (out / "report.json").read_text(encoding="utf-8")
    assert list(json.loads(text)) == sorted(json.loads(text))
    assert not [p for p in out.iterdir() if p.name.startswith(".")]


def test_config_echo_reproduces_run(tmp_path):
    cfg = {**BASE, "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [0], [1]]}}}
    code, out = run(tmp_path, "solve", cfg, "--seed", "9")
    assert code == 0
    first = (out / "report.json").read_bytes()
    echoed = json.loads(first)["config"]
    assert echoed["ensemble"]["seed"] == 9
    assert main(["solve", "--config", str(write(tmp_path, echoed, "echo.json"))]) == 0
    assert (out / "report.json").read_bytes() == first


def test_cost_derived_solve_and_kernel(tmp_path):
    cfg = {**BASE, "problem": {"cost": {"g": [0, 1], "G": [0]}}}
    code, out = run(tmp_path, "kernel", cfg)
    assert code == 0
    k = json.loads((out / "kernel.json").read_text())
    assert k["kernel"]["coeffs"] == [[1.0, -1.0]]
    assert "residual_rms" in json.loads((out / "residual.json").read_text())
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    assert json.loads((out / "report.json").read_text())["terminal_value"] == pytest.approx(-0.5)


def test_kernel_warns_on_cubic(tmp_path):
    code, out = run(tmp_path, "kernel", {**BASE, "problem": {"cost": {"g": [0, 0, 0, 1], "G": [0]}}})
    assert code == 0
    assert json.loads((out / "kernel.json").read_text())["warnings"]


def test_om_reports_cross_route_gap(tmp_path):
    cfg = {**BASE, "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [1]]}}}
    assert run(tmp_path, "solve", cfg)[0] == 0
    code, out = run(tmp_path, "om", cfg)
    assert code == 0
    rep = json.loads((out / "om_report.json").read_text())
    assert rep["converged"] and rep["cross_route"]["sup_gap"] < 0.1
    assert (out / "om_solution.csv").read_text().startswith("t,q\n")


def test_penalty_and_simulate(tmp_path):
    cfg = {**BASE, "problem": {"drift": {"type": "mixture", "components": [[0, 1], [0, -1]],
                                         "probs": [0.5, 0.5]}}}
    code, out = run(tmp_path, "penalty", cfg)
    assert code == 0
    assert json.loads((out / "penalty.json").read_text())["value"] == pytest.approx(0.5, rel=0.1)
    cfg = {**BASE, "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [0], [1]]}},
           "outputs": {"emit_xtilde": 3}}
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    assert (out / "xtilde.csv").read_text().splitlines()[0] == "t,x0,x1,x2"
    assert json.loads((out / "blowup.json").read_text())["paths"] == 500


@pytest.mark.parametrize("cfg", [
    {**BASE, "problem": {}},
    {**BASE, "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [1]]},
                         "cost": {"g": [0, 1], "G": [0]}}},
    {**BASE, "horizon": -1.0, "problem": {"cost": {"g": [0, 1], "G": [0]}}},
    {**BASE, "n": 1, "problem": {"cost": {"g": [0, 1], "G": [0]}}},
    {**BASE, "problem": {"kernel": {"type": "expr", "f": "x + y"}}},
    {**BASE, "problem": {"drift": {"type": "deterministic", "F": [1, 1]}}},
])
def test_config_errors_exit_2(tmp_path, cfg, capsys):
    command = "penalty" if "drift" in cfg.get("problem", {}) else "solve"
    assert run(tmp_path, command, cfg)[0] == 2
    assert "config error" in capsys.readouterr().err


def test_kernel_without_cost_exits_2(tmp_path):
    cfg = {**BASE, "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [1]]}}}
    assert run(tmp_path, "kernel", cfg)[0] == 2


def test_invalid_json_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"horizon": 1.0,\n "n": }', encoding="utf-8")
    assert main(["solve", "--config", str(p)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_shooting_failure_exits_1(tmp_path, capsys):
    cfg = {"horizon": 3.0, "n": 100, "solver": {"slope_bound": 2},
           "problem": {"kernel": {"type": "space_poly", "coeffs": [[0], [0], [0], [0], [5]]}}}
    assert run(tmp_path, "solve", cfg)[0] == 1
    assert "diagnostics" in capsys.readouterr().err


def test_load_config_fills_defaults():
    cfg = load_config(json.dumps({"horizon": 2.0, "n": 10,
                                  "problem": {"cost": {"g": [1], "G": [0]}}}),
                      {"ensemble.seed": 5})
    assert cfg["ensemble"] == {"M": 10000, "seed": 5}
    assert cfg["solver"]["bc"] == "free"
    with pytest.raises(ConfigError):
        load_config('{"horizon": 1, "n": 10, "problem": {"cost": {"g": [1], "G": [0]}}, "bogus": 1}')


def test_validate_subset_and_hook(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["validate", "--only", "C1,C8", "--out", str(a)]) == 0
    assert main(["validate", "--only", "C1,C8", "--out", str(b)]) == 0
    assert (a / "validate_report.json").read_bytes() == (b / "validate_report.json").read_bytes()
    capsys.readouterr()
    assert main(["validate", "--only", "C1", "--tol-scale", "C1=0"]) == 1
    assert "C1   FAIL" in capsys.readouterr().out
    assert main(["validate", "--only", "C42"]) == 2
