import csv
import json

import pytest

from vekuakit.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, canonical, main
from vekuakit.suites import ConfigError, SuiteConfig, fit_order, run_suites


def test_fit_order_of_power_law():
    hs = [0.1, 0.05, 0.025]
    assert fit_order(hs, [3 * h ** 2 for h in hs]) == pytest.approx(2.0)


@pytest.mark.parametrize("bad", [
    {"n": 1},
    {"grids": [17, 9]},
    {"grids": [9]},
    {"suites": ["algebra", "poetry"]},
    {"tolerances": {"orthogonality": -1.0}},
    {"tolerances": {"made_up": 1.0}},
    {"box": [[0, 1]]},
    {"colour": "red"},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        SuiteConfig.from_dict(bad)


def test_algebra_suite_in_three_dimensions():
    rec = run_suites(SuiteConfig(n=3, suites=["algebra"]))[0]
    assert all(c.passed for c in rec.checks)
    assert sum(c.runtime_s for c in rec.checks) < 1.0


def test_config_error_exit(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 0}))
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg.write_text("{not json")
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["verify", "--grid", "9,x", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_expression_is_config_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"target": "__import__('os')"}))
    assert main(["hodge", "--config", str(cfg), "--grid", "9,17", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_verify_outputs_and_determinism(tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        code = main(["verify", "--suites", "algebra,factorization", "--seed", "5", "--out", str(out)])
        assert code == EXIT_OK
        runs.append(json.loads((out / "report.json").read_text()))
        rows = list(csv.DictReader((out / "convergence.csv").open()))
        assert rows and set(rows[0]) == {"check", "m", "h", "residual", "order"}
    assert json.dumps(canonical(runs[0])) == json.dumps(canonical(runs[1]))
    rep = runs[0]
    names = [(c["suite"], c["name"]) for c in rep["checks"]]
    assert len(names) == len(set(names))
    assert rep["status"] == "pass" and rep["config"]["seed"] == 5
    assert {"python", "numpy", "scipy"} <= set(rep["environment"])


def test_failing_check_sets_exit(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"suites": ["algebra"], "tolerances": {"algebra_runtime_s": 1e-9}}))
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_FAIL
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["status"] == "fail" and rep["failed"] == ["algebra.runtime"]


def test_other_subcommands(tmp_path):
    assert main(["hodge", "--grid", "9,17", "--out", str(tmp_path)]) == EXIT_OK
    cert = json.loads((tmp_path / "hodge.json").read_text())
    assert cert["split"]["orthogonality"] < 1e-10
    assert main(["kernels", "--grid", "9,17", "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "kernel_A0.csv").exists()
    main(["factorize", "--grid", "9,17,33", "--out", str(tmp_path)])
    assert (tmp_path / "factorization.csv").exists()
