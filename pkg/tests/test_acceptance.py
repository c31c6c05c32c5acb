"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed even when output capture is on.
"""

import os
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import BETAS, LOADS, case33, plan33
from microplan.grid_model import random_toy, toy4
from microplan.milp import OPTIMAL, from_dense, solve_lp
from microplan.oracle import brute_force_plan, linearization_audit
from microplan.planner import SolveOptions, check_plan, solve_stage, solve_two_stage

PRICES = (0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8)
TOY_SEEDS = range(6)


@pytest.fixture
def report(capsys):
    def emit(name, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok
    return emit


def test_oracle_equivalence(report):
    start = time.perf_counter()
    worst = 0.0
    cases = [toy4()] + [random_toy(s) for s in TOY_SEEDS]
    for p in cases:
        assert len(p.buses) <= 6 and p.timeseries.num_periods <= 8
        ref = brute_force_plan(p).objective
        got = solve_two_stage(p).stage_info.stage1_objective
        worst = max(worst, abs(got - ref) / (1.0 + abs(ref)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 60 and len(cases) >= 5
    report("oracle equivalence", ok, f"{len(cases)} toys, max rel diff {worst:.2e}, {elapsed:.1f} s")
    assert ok


def random_dense_lp(seed, m=10, n=20):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0, 1, n)
    return dict(c=rng.normal(size=n), A_ub=A, b_ub=A @ x0 + rng.uniform(0, 1, m), bounds=(0.0, 2.0))


def test_lp_certification(report):
    worst_gap = worst_res = 0.0
    count = 0
    for seed in range(20):
        data = random_dense_lp(seed)
        sol = solve_lp(from_dense(**data), backend="simplex")
        ref = linprog(method="highs", **data)
        assert sol.status == OPTIMAL
        assert sol.objective_value == pytest.approx(ref.fun, rel=1e-8, abs=1e-8)
        r = sol.residuals
        worst_gap = max(worst_gap, r.gap)
        worst_res = max(worst_res, r.primal, r.dual)
        count += 1
    plan = solve_stage(toy4(), 1, None, SolveOptions(record_nodes=True))
    nodes = [n for n in plan.node_log if n.status == OPTIMAL]
    assert nodes
    for n in nodes:
        worst_gap = max(worst_gap, n.residuals.gap)
        worst_res = max(worst_res, n.residuals.primal, n.residuals.dual)
        count += 1
    ok = worst_gap <= 1e-6 and worst_res <= 1e-8
    report("LP certification", ok, f"{count} LPs, max gap {worst_gap:.1e}, max residual {worst_res:.1e}")
    assert ok


def _all_plans():
    plans = [(p, solve_two_stage(p)) for p in [toy4()] + [random_toy(s) for s in TOY_SEEDS]]
    for beta in BETAS:
        for lines in (False, True):
            plans.append((case33(beta=beta, lines=lines), plan33(beta=beta, lines=lines)))
    for load in LOADS:
        plans.append((case33(load=load), plan33(load=load)))
    return plans


def test_formulation_invariants(report):
    keys = ("balance_p", "balance_q", "storage_window", "storage_daily", "gating", "islanding", "critical")
    worst = dict.fromkeys(keys, 0.0)
    failed = []
    plans = _all_plans()
    for problem, plan in plans:
        for stage_plan in (plan.stage_info.stage1_plan, plan):
            chk = check_plan(stage_plan, problem)
            for k in keys:
                worst[k] = max(worst[k], chk.residuals.get(k, 0.0))
            if not chk.ok:
                failed.append((problem.name, chk.failures))
            beta = problem.economics.critical_ratio
            if stage_plan.dispatchable_capacity < beta * problem.peak_demand - 1e-6:
                failed.append((problem.name, "critical"))
            for s, sc in enumerate(problem.scenarios.scenarios):
                if np.any(np.abs(stage_plan.dispatch.p_m[s, sc.u == 0]) > 1e-6):
                    failed.append((problem.name, "islanded exchange"))
    ok = not failed and all(v <= 1e-6 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report("formulation invariants", ok, f"{2 * len(plans)} plans; {detail}")
    assert ok, failed


def test_trend_reproduction(report):
    start = time.perf_counter()
    inv = [plan33(beta=b).costs.investment for b in BETAS]
    beta_pairs = [(plan33(beta=b, lines=True).costs.total, plan33(beta=b, lines=False).costs.total) for b in BETAS]
    price_pairs = [(plan33(price=r, lines=True).costs.total, plan33(price=r, lines=False).costs.total)
                   for r in PRICES]
    load_cost = [plan33(load=x).costs.total for x in LOADS]
    zero_beta = plan33(beta=0.0).dispatchable_capacity
    checks = {
        "investment non-decreasing in beta": all(b >= a - 1e-6 for a, b in zip(inv, inv[1:])),
        "with lines <= without lines": all(w <= wo + 1e-6 * abs(wo) for w, wo in beta_pairs + price_pairs),
        "planning cost increasing in load": all(b > a for a, b in zip(load_cost, load_cost[1:])),
        "no dispatchable DG at beta 0": zero_beta <= 1e-7,
    }
    ok = all(checks.values())
    report("trend reproduction", ok,
           "; ".join(f"{k} {'ok' if v else 'VIOLATED'}" for k, v in checks.items())
           + f" ({time.perf_counter() - start:.1f} s)")
    assert ok


def test_beta_sweep_runtime(tmp_path, report):
    env = dict(os.environ, MICROPLAN_THREADS="4")
    start = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "microplan.cli", "sweep", "--axis", "beta",
                           "--values", ",".join(f"{b:g}" for b in BETAS), "--out", str(tmp_path)],
                          env=env, capture_output=True, text=True)
    elapsed = time.perf_counter() - start
    cells = len(list((tmp_path / "cells").glob("*.json")))
    ok = proc.returncode == 0 and cells == 12 and elapsed <= 15 * 60
    report("full beta sweep runtime", ok, f"{cells} cells in {elapsed:.1f} s on 4 workers")
    assert ok, proc.stderr


def _audit_errors():
    out = {}
    for dv in (0.02, 0.05, 0.10):
        p = case33(dv=dv)
        plan = solve_two_stage(p)
        out[dv] = linearization_audit(plan.stage_info.stage1_plan, p).max_rel_limit_error
    return out


@pytest.mark.xfail(strict=True, reason="linear flows on builtin33 miss up to 16% of a line limit at +-0.05; "
                                       "see the decisions ledger")
def test_linearization_audit(report):
    err = _audit_errors()
    within = err[0.05] <= 0.02
    monotone = err[0.02] <= err[0.05] <= err[0.10]
    ok = within and monotone
    report("linearization audit", ok,
           ", ".join(f"+-{dv:g}: {100 * e:.2f}% of limit" for dv, e in err.items())
           + f"; threshold 2% {'met' if within else 'exceeded'}, monotone {'yes' if monotone else 'no'}")
    assert ok


def _run_cli(argv, env=None):
    return subprocess.run([sys.executable, "-m", "microplan.cli", *argv], env=env, capture_output=True,
                          text=True).returncode


def test_determinism(tmp_path, report):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d in (a, b):
        assert _run_cli(["plan", "--beta", "0.4", "--out", str(d)]) == 0
    sweep = ["sweep", "--axis", "load", "--values", "1,1.4"]
    for d, threads in ((a, "1"), (b, "1"), (c, "2")):
        assert _run_cli(sweep + ["--out", str(d)], dict(os.environ, MICROPLAN_THREADS=threads)) == 0
    same_plan = (a / "plan.json").read_bytes() == (b / "plan.json").read_bytes()
    same_csv = all((a / f).read_bytes() == (b / f).read_bytes() == (c / f).read_bytes()
                   for f in ("sweep_plan.csv", "sweep_costs.csv"))
    ok = same_plan and same_csv
    report("determinism", ok, f"plan documents identical {same_plan}, sweep CSVs identical {same_csv}")
    assert ok
