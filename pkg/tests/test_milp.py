import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from microplan.milp import (INFEASIBLE, MILP_INFEASIBLE, MILP_NODE_LIMIT, MILP_OPTIMAL, OPTIMAL, UNBOUNDED,
                            LpEngine, MilpOptions, ModelBuilder, check_solution, from_dense, relative_gap,
                            solve_lp, solve_milp, write_lp)


def random_lp(seed, m=12, n=10):
    """Feasible, bounded LP: a box-bounded point satisfies every row."""
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    x0 = rng.uniform(0, 5, n)
    b = A @ x0 + rng.uniform(0, 2, m)
    k = m // 3
    c = rng.normal(size=n)
    return dict(c=c, A_ub=A[k:], b_ub=b[k:], A_eq=A[:k], b_eq=A[:k] @ x0, bounds=(0.0, 10.0))


def random_knapsack(seed, n=8):
    rng = np.random.default_rng(seed)
    w = rng.uniform(1, 10, (2, n))
    v = rng.uniform(1, 10, n)
    cap = w.sum(axis=1) * 0.4
    return -v, w, cap


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_lp_matches_scipy(seed, backend):
    data = random_lp(seed)
    ref = linprog(method="highs", **data)
    sol = solve_lp(from_dense(**data), backend=backend)
    assert sol.status == OPTIMAL
    assert sol.certified
    assert sol.objective_value == pytest.approx(ref.fun, rel=1e-8, abs=1e-8)


def test_lp_infeasible():
    model = from_dense([1.0, 1.0], A_ub=[[1.0, 1.0]], b_ub=[-1.0])
    for backend in ("simplex", "highs"):
        assert solve_lp(model, backend=backend).status == INFEASIBLE


def test_lp_unbounded():
    model = from_dense([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0], bounds=(0.0, np.inf))
    assert solve_lp(model, backend="simplex").status == UNBOUNDED


def test_lp_crossed_bounds_infeasible():
    model = from_dense([1.0], A_ub=[[1.0]], b_ub=[1.0])
    sol = LpEngine(model, "simplex").solve(lb=np.array([2.0]), ub=np.array([1.0]))
    assert sol.status == INFEASIBLE


def test_warm_start_agrees_with_cold():
    data = random_lp(3)
    model = from_dense(**data)
    engine = LpEngine(model, "simplex")
    root = engine.solve()
    ub = model.ub.copy()
    ub[0] = max(0.0, root.primal[0] / 2)
    warm = engine.solve(model.lb, ub, warm=root.basis)
    cold = LpEngine(model, "simplex").solve(model.lb, ub)
    assert warm.status == cold.status
    if warm.status == OPTIMAL:
        assert warm.objective_value == pytest.approx(cold.objective_value, rel=1e-9, abs=1e-9)


def enumerate_binary(c, w, cap):
    best = np.inf
    for bits in itertools.product((0, 1), repeat=len(c)):
        x = np.array(bits, dtype=float)
        if np.all(w @ x <= cap + 1e-12):
            best = min(best, float(c @ x))
    return best


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_bnb_matches_enumeration(seed):
    c, w, cap = random_knapsack(seed)
    model = from_dense(c, A_ub=w, b_ub=cap, bounds=(0.0, 1.0), binary=np.ones(len(c), bool))
    sol = solve_milp(model, MilpOptions(gap_tol=1e-9))
    assert sol.status == MILP_OPTIMAL
    assert sol.objective_value == pytest.approx(enumerate_binary(c, w, cap), abs=1e-9)
    assert check_solution(model, sol.incumbent).ok


def test_bnb_infeasible():
    model = from_dense([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[0.5], bounds=(0.0, 1.0), binary=[True, True])
    assert solve_milp(model).status == MILP_INFEASIBLE


def test_bnb_node_limit():
    c, w, cap = random_knapsack(7, n=14)
    model = from_dense(c, A_ub=w, b_ub=cap, bounds=(0.0, 1.0), binary=np.ones(14, bool))
    sol = solve_milp(model, MilpOptions(node_limit=1, heuristics=False))
    assert sol.status in (MILP_NODE_LIMIT, MILP_OPTIMAL)
    assert sol.nodes_explored <= 1 or sol.status == MILP_OPTIMAL


def test_bnb_records_certified_nodes():
    c, w, cap = random_knapsack(11)
    model = from_dense(c, A_ub=w, b_ub=cap, bounds=(0.0, 1.0), binary=np.ones(len(c), bool))
    sol = solve_milp(model, MilpOptions(record_nodes=True))
    assert sol.node_log
    for rec in sol.node_log:
        if rec.status == OPTIMAL:
            assert rec.certified


def test_options_validation():
    with pytest.raises(ValueError):
        MilpOptions(gap_tol=0.0)
    with pytest.raises(ValueError):
        MilpOptions(node_limit=0)


def test_relative_gap():
    assert relative_gap(100.0, 99.0) == pytest.approx(0.01)
    assert relative_gap(0.5, 0.0) == pytest.approx(0.5)
    assert relative_gap(np.inf, 0.0) == np.inf


def test_check_solution_reports_violations():
    model = from_dense([1.0, 1.0], A_ub=[[1.0, 1.0]], b_ub=[1.0], bounds=(0.0, 1.0), binary=[True, False])
    rep = check_solution(model, [0.5, 0.9])
    assert rep.integrality == pytest.approx(0.5)
    assert rep.rows == pytest.approx(0.4)
    assert not rep.ok
    assert check_solution(model, [1.0, 0.0]).ok
    with pytest.raises(ValueError):
        check_solution(model, [0.0])


def test_builder_and_lp_export(tmp_path):
    mb = ModelBuilder()
    x = mb.add_var(0, 1, cost=-2.0, binary=True, name="build[1]")
    y = mb.add_var(0, 5, cost=1.0, name="flow")
    mb.add_row([x, y], [3.0, -1.0], "<=", 1.0, name="link")
    model = mb.build()
    sol = solve_milp(model)
    assert sol.status == MILP_OPTIMAL
    assert sol.objective_value == pytest.approx(0.0)
    text = write_lp(model, tmp_path / "m.lp").read_text()
    assert "Binaries" in text and "build[1]" in text and text.rstrip().endswith("End")
