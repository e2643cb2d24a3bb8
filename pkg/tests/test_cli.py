import csv
import json
import subprocess
import sys

import pytest

from rtnep.cli import EXIT_CAP, EXIT_ERROR, EXIT_LIMIT, EXIT_OK, main
from rtnep.grid import builtin_case_path, save_case
from rtnep.pccg import deterministic_plan
from rtnep.synthetic import large_grid

GARVER = str(builtin_case_path("garver6"))


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def run(*argv):
    return main([str(a) for a in argv])


def test_solve_zero_budgets_writes_deterministic_plan(tmp_path, garver):
    out = tmp_path / "o"
    assert run("solve", "--case", GARVER, "--gamma-d", 0, "--gamma-g", 0, "--out", out) == EXIT_OK
    assert set(files(out)) == {"plan.json", "worst.json", "log.csv", "log.json", "manifest.json"}
    doc = json.loads((out / "plan.json").read_text())
    plan, cost = deterministic_plan(garver)
    assert doc["built"] == list(plan.built)
    assert doc["total_cost"] == pytest.approx(cost, rel=1e-9)
    worst = json.loads((out / "worst.json").read_text())
    assert not any(worst["z_d"]) and not any(worst["z_g"])
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "solve" and len(man["case_sha256"]) == 64
    assert "started" not in man


def test_missing_case_is_usage_error(tmp_path, capsys):
    assert run("solve", "--gamma-d", 0, "--gamma-g", 0, "--out", tmp_path) == EXIT_ERROR
    assert "--case" in capsys.readouterr().err
    assert run() == EXIT_ERROR
    assert run("solve", "--case", tmp_path / "nope.json", "--gamma-d", 0, "--gamma-g", 0) == EXIT_ERROR


def test_bad_budget_and_env(tmp_path, monkeypatch):
    assert run("solve", "--case", GARVER, "--gamma-d", 9, "--gamma-g", 0, "--out", tmp_path) == EXIT_ERROR
    monkeypatch.setenv("RTNEP_EPS_OL", "abc")
    assert run("solve", "--case", GARVER, "--gamma-d", 0, "--gamma-g", 0, "--out", tmp_path) == EXIT_ERROR


def test_solve_reruns_byte_identical(tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run("solve", "--case", GARVER, "--gamma-d", 2, "--gamma-g", 1, "--seed", 7, "--out", out) == EXIT_OK
    assert files(outs[0]) == files(outs[1])


def test_limit_exit_code(tmp_path):
    code = run("solve", "--case", GARVER, "--gamma-d", 3, "--gamma-g", 2, "--max-outer", 1, "--out", tmp_path)
    assert code == EXIT_LIMIT
    rows = list(csv.reader((tmp_path / "log.csv").open()))
    assert len(rows) == 2


def test_timing_flag_records_times(tmp_path):
    assert run("solve", "--case", GARVER, "--gamma-d", 1, "--gamma-g", 0, "--timing", "--out", tmp_path) == EXIT_OK
    assert "started" in json.loads((tmp_path / "manifest.json").read_text())
    rows = list(csv.reader((tmp_path / "log.csv").open()))
    assert all(float(r[-1]) >= 0 for r in rows[1:])


def test_oracle_then_assess(tmp_path):
    o, a1, a2 = tmp_path / "o", tmp_path / "a1", tmp_path / "a2"
    assert run("oracle", "robust-plan", "--case", GARVER, "--gamma-d", 1, "--gamma-g", 1, "--out", o) == EXIT_OK
    for a in (a1, a2):
        assert run("assess", "--case", GARVER, "--plan", o / "plan.json", "--gamma-d", 1, "--gamma-g", 1,
                   "--samples", 100, "--seed", 3, "--out", a) == EXIT_OK
    assert set(files(a1)) == {"assess.csv", "histogram.csv", "summary.json", "manifest.json"}
    summary = json.loads((a1 / "summary.json").read_text())
    assert summary["exceedances"] == 0 and summary["samples"] == 100
    assert summary["worst_case_reference"] == json.loads((o / "plan.json").read_text())["worst_cost"]
    assert files(a1) == files(a2)


def test_assess_plan_mismatch(tmp_path, capsys):
    p = tmp_path / "plan.json"
    p.write_text(json.dumps({"built": [0, 1]}))
    assert run("assess", "--case", GARVER, "--plan", p, "--gamma-d", 0, "--gamma-g", 0, "--samples", 5,
               "--out", tmp_path / "o") == EXIT_ERROR
    assert "2 entries" in capsys.readouterr().err
    assert run("assess", "--case", GARVER, "--plan", p, "--gamma-d", 0, "--gamma-g", 0, "--samples", 0,
               "--out", tmp_path / "o") == EXIT_ERROR


def test_oracle_zero_budget_is_nominal(tmp_path):
    assert run("oracle", "worst-case", "--case", GARVER, "--gamma-d", 0, "--gamma-g", 0, "--out", tmp_path) == EXIT_OK
    doc = json.loads((tmp_path / "worst.json").read_text())
    assert not any(doc["z_d"]) and not any(doc["z_g"])


def test_oracle_cap_exit(tmp_path, capsys):
    assert run("oracle", "worst-case", "--case", GARVER, "--gamma-d", 5, "--gamma-g", 3, "--cap", 255,
               "--out", tmp_path) == EXIT_CAP
    assert "count 256" in capsys.readouterr().err


def test_oracle_cap_exit_large_case(tmp_path, capsys):
    case = large_grid(n_buses=118, n_lines=186, n_candidates=10, seed=1, congested=8)
    path = tmp_path / "c118.json"
    save_case(case, path)
    nd, ng = len(case.loads), len(case.generators)
    assert run("oracle", "worst-case", "--case", path, "--gamma-d", nd, "--gamma-g", ng,
               "--out", tmp_path / "o") == EXIT_CAP
    assert f"count {2 ** (nd + ng)}" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "rtnep.cli", "oracle", "worst-case", "--case", GARVER,
                        "--gamma-d", "1", "--gamma-g", "0", "--out", str(tmp_path)],
                       capture_output=True, text=True)
    assert r.returncode == EXIT_OK, r.stderr
    assert "worst operating cost" in r.stdout
