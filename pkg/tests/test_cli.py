import dataclasses
import json

import pytest

from microplan.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, SweepSpec, main, read_csv_table
from microplan.grid_model import DerKind, save_problem, toy4


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr().out


def test_plan_toy4_with_verify(tmp_path, capsys):
    code, out = run(["plan", "--case", "toy4", "--verify", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert "verify:" in out and "ok" in out
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert plan["stage"] == 2
    costs = {r["component"]: float(r["dollars"]) for r in read_csv_table(tmp_path / "costs.csv")}
    assert costs["Planning Cost ($)"] == pytest.approx(
        costs["Investment Cost ($)"] + costs["Operation Cost ($)"] + costs["Reliability Cost ($)"], abs=2)
    rows = read_csv_table(tmp_path / "dispatch.csv")
    assert len(rows) == 4
    assert {"scenario", "hour", "p_m_mw", "shed_mw"} <= set(rows[0])


def test_plan_missing_case_file(tmp_path, capsys):
    code, _ = run(["plan", "--case", str(tmp_path / "nope.toml"), "--out", str(tmp_path)], capsys)
    assert code == EXIT_INPUT


def test_plan_infeasible_case(tmp_path, capsys):
    p = toy4()
    ders = tuple(dataclasses.replace(d, p_cap=0.01) if d.kind is DerKind.DISPATCHABLE else d
                 for d in p.der_candidates)
    path = save_problem(dataclasses.replace(p, der_candidates=ders), tmp_path / "tiny.toml")
    code, _ = run(["plan", "--case", str(path), "--beta", "1", "--out", str(tmp_path / "o")], capsys)
    assert code == EXIT_INFEASIBLE


def test_bad_arguments(capsys):
    assert main(["plan", "--beta", "not-a-number"]) == EXIT_INPUT
    assert main(["frobnicate"]) == EXIT_INPUT
    capsys.readouterr()


def test_sweep_rejects_unsorted_values(tmp_path, capsys):
    code, _ = run(["sweep", "--case", "toy4", "--values", "0.4,0.2", "--out", str(tmp_path)], capsys)
    assert code == EXIT_INPUT


def test_sweep_spec():
    spec = SweepSpec("load", (1.0, 1.5))
    assert spec.cells() == [(1.0, False), (1.0, True), (1.5, False), (1.5, True)]
    assert SweepSpec("beta", (0.2,), with_lines=False).cells() == [(0.2, True)]
    with pytest.raises(ValueError):
        SweepSpec("voltage", (1.0,))
    with pytest.raises(ValueError):
        SweepSpec("beta", ())
    with pytest.raises(ValueError):
        SweepSpec("beta", (0.2, 0.2))


def test_sweep_toy_outputs(tmp_path, capsys):
    code, _ = run(["sweep", "--case", "toy4", "--axis", "beta", "--values", "0,0.4", "--out", str(tmp_path)],
                  capsys)
    assert code == EXIT_OK
    rows = read_csv_table(tmp_path / "sweep_costs.csv")
    assert [(r["beta"], r["lines"]) for r in rows] == [("0", "w/o lines"), ("0", "w/ lines"),
                                                       ("0.4", "w/o lines"), ("0.4", "w/ lines")]
    # without the candidate lines buses 3 and 4 have no reactive supply
    assert [r["status"] for r in rows] == ["infeasible", "ok", "infeasible", "ok"]
    assert len(list((tmp_path / "cells").glob("*.json"))) == 2


def test_sweep_cell_matches_single_plan(tmp_path):
    a, b = tmp_path / "sweep", tmp_path / "plan"
    assert main(["sweep", "--axis", "load", "--values", "1", "--no-candidate-lines", "--out", str(a)]) == EXIT_OK
    assert main(["plan", "--no-candidate-lines", "--out", str(b)]) == EXIT_OK
    cell = a / "cells" / "load_1_with_lines.json"
    assert cell.read_bytes() == (b / "plan.json").read_bytes()


def test_audit_command(tmp_path, capsys):
    code, out = run(["audit", "--case", "toy4", "--out", str(tmp_path)], capsys)
    assert code == EXIT_OK
    assert "stage 1:" in out and "stage 2:" in out
    assert read_csv_table(tmp_path / "audit_stage1.csv")
    assert read_csv_table(tmp_path / "audit_stage2.csv")
