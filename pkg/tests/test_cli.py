"""Scenario runner: exit codes, artifacts, determinism."""

import json
from pathlib import Path

import numpy as np

from torusflow.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def run(args):
    return main([str(a) for a in args])


def test_zero_field_solve(tmp_path):
    code = run(["solve", SCENARIOS / "zero_field.json", "--out", tmp_path])
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["pass"]
    assert (tmp_path / "flow.json").exists()
    assert (tmp_path / "iteration_log.csv").exists()
    assert (tmp_path / "norms.csv").exists()


def test_inadmissible_exit_code_names_bound(tmp_path, capsys):
    code = run(["solve", SCENARIOS / "inadmissible.json", "--out", tmp_path])
    assert code == 3
    err = capsys.readouterr().err
    assert "0.5" in err and "admissibility" in err
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert not summary["pass"]


def test_sine_benchmark_reproduces_closed_form(tmp_path):
    code = run(["solve", SCENARIOS / "sine_benchmark.json", "--out", tmp_path])
    assert code == 0
    flow = json.loads((tmp_path / "flow.json").read_text())
    # reconstruct the endpoint map and probe it against the tangent flow
    end = flow["snapshots"][-1]
    order = 32
    coeffs = np.zeros((2 * order + 1, 1), complex)
    for k, re, im in end:
        coeffs[k + order, 0] = re + 1j * im
    y0 = 0.25
    val = y0 + (coeffs[:, 0]
                * np.exp(2j * np.pi * np.arange(-order, order + 1) * y0)).sum()
    a = 0.02
    want = np.arctan(np.exp(2 * np.pi * a) * np.tan(np.pi * y0)) / np.pi
    assert abs(val.real - want) < 1e-8


def test_invalid_scenario_exit_two(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["solve", bad]) == 2
    wrong_kind = tmp_path / "wrong.json"
    wrong_kind.write_text(json.dumps({"kind": "solve"}))
    assert run(["trotter", wrong_kind]) == 2
    missing_seed = tmp_path / "seedless.json"
    missing_seed.write_text(json.dumps({"kind": "sweep", "count": 1}))
    assert run(["sweep", missing_seed]) == 2


def test_trotter_scenario(tmp_path):
    code = run(["trotter", SCENARIOS / "trotter_pair.json", "--out", tmp_path])
    assert code == 0
    rows = (tmp_path / "trotter.csv").read_text().strip().splitlines()
    assert rows[0] == "n,distance"
    assert len(rows) == 6


def test_sweep_determinism_across_workers(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    scenario = tmp_path / "sweep.json"
    scenario.write_text(json.dumps({
        "kind": "sweep", "count": 3, "order": 32, "eps": 0.05, "seed": 7,
        "tolerances": {"tol_solve": 1e-10}}))
    assert run(["sweep", scenario, "--out", out1]) == 0
    assert run(["sweep", scenario, "--out", out2, "--workers", 2]) == 0
    assert (out1 / "sweep.csv").read_bytes() == (out2 / "sweep.csv").read_bytes()


def test_verify_scenario(tmp_path):
    scenario = tmp_path / "verify.json"
    base = json.loads((SCENARIOS / "sine_benchmark.json").read_text())
    base["kind"] = "verify"
    scenario.write_text(json.dumps(base))
    code = run(["verify", scenario, "--out", tmp_path / "v"])
    assert code == 0
    assert (tmp_path / "v" / "pointwise_residuals.csv").exists()
    assert (tmp_path / "v" / "ac_modulus.csv").exists()


def test_limits_scenario(tmp_path):
    scenario = tmp_path / "limits.json"
    base = json.loads((SCENARIOS / "limits_square.json").read_text())
    base["count"] = 200
    base["ratio_samples"] = 100
    scenario.write_text(json.dumps(base))
    assert run(["limits", scenario, "--out", tmp_path / "l"]) == 0
    rows = (tmp_path / "l" / "continuity.csv").read_text().splitlines()
    assert rows[0] == "sample_id,depth,telescoped_bound,observed_p,pass"
    assert len(rows) == 201


def test_pullback_scenario(tmp_path):
    code = run(["pullback", SCENARIOS / "pullback_sine.json",
                "--out", tmp_path])
    assert code == 0
    assert (tmp_path / "pullback_matrix.csv").exists()
    summary = json.loads((tmp_path / "summary.json").read_text())
    names = {c["name"] for c in summary["checks"]}
    assert {"pullback_ac", "transport_residual", "contravariance",
            "linearity"} <= names
