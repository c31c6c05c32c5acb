import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import case33, plan33
from microplan.errors import InfeasibleError, IntegralityError, ModelSizeError, StageError
from microplan.grid_model import (Bus, DerCandidate, DerKind, Economics, Line, Period, PlanningProblem,
                                  ScenarioSet, TimeSeriesBundle, present_worth, random_toy, toy4)
from microplan.milp import MILP_OPTIMAL, MilpSolution, check_solution, solve_milp
from microplan.planner import (Dispatch, InstalledDer, PlanSolution, SolveOptions, build_milp, check_plan,
                               cost_breakdown, extract_plan, plan_to_dict, solve_stage, solve_two_stage)

TOY_SEEDS = st.integers(0, 10_000)


def two_bus(load_mw=0.5, price=60.0, gen_price=40.0):
    """POI at bus 1, one load bus, one existing line, one dispatchable DG at bus 2."""
    buses = (Bus(1, is_poi=True), Bus(2))
    lines = (Line.from_ohms(1, 1, 2, 0.4, 0.3, 2.0, 2.0, 12.66, 10.0),)
    ders = (DerCandidate(1, DerKind.DISPATCHABLE, (2,), p_cap=1.0, annual_cost_power=1_000.0,
                         gen_price=gen_price),)
    periods = (Period(1, 1, 12, 365.0),)
    ts = TimeSeriesBundle(periods, np.array([[0.0, load_mw]]), np.array([[0.0, 0.2 * load_mw]]),
                          np.array([price]))
    econ = Economics(critical_ratio=0.0, horizon_years=1)
    return PlanningProblem(buses, lines, ders, ts, ScenarioSet.grid_only(1), econ)


def empty_plan(problem, ders=(), lines=()):
    S, T = len(problem.scenarios), problem.timeseries.num_periods
    G = sum(d.kind is not DerKind.STORAGE for d in problem.der_candidates)
    E = len(problem.der_candidates) - G
    z = np.zeros
    disp = Dispatch(z((S, T, G)), z((S, T, G)), z((S, T, E)), z((S, T, E)), z((S, T)), z((S, T)),
                    z((S, T, len(problem.buses))))
    return PlanSolution("Optimal", 1, 0.0, tuple(ders), tuple(lines), disp, None)


def test_stage_argument_checked():
    p = toy4()
    with pytest.raises(StageError):
        build_milp(p, stage=3)
    with pytest.raises(StageError):
        build_milp(p, stage=2)
    with pytest.raises(StageError):
        build_milp(p, stage=2, dv_hat=np.zeros((1, 1, 1)))


def test_cell_budget():
    with pytest.raises(ModelSizeError):
        build_milp(case33(), cell_budget=100)


def test_variable_families_partition_columns():
    model, index = build_milp(toy4())
    cols = np.concatenate([c for _, c in index.families()])
    assert len(cols) == len(set(cols.tolist())) == model.num_vars == index.num_vars
    assert sorted(index.binary_columns()) == sorted(model.binary_indices.tolist())


def test_two_bus_gen_cheaper_than_grid():
    plan = solve_two_stage(two_bus(price=60.0, gen_price=40.0))
    assert plan.installed_lines == ()
    assert plan.der(1) is not None
    assert check_plan(plan, two_bus(price=60.0, gen_price=40.0)).ok


def test_two_bus_grid_cheaper_than_gen():
    plan = solve_two_stage(two_bus(price=30.0, gen_price=40.0))
    assert plan.installed_ders == ()
    assert plan.dispatch.p_m[0, 0] == pytest.approx(0.5, abs=1e-7)
    assert plan.costs.investment == 0.0


def test_cost_example_dg3():
    p = case33()
    plan = empty_plan(p, ders=[InstalledDer(3, DerKind.DISPATCHABLE, 32, 0.65)])
    cb = cost_breakdown(plan, p, check=False)
    assert cb.per_year[0].investment == pytest.approx(45_500.0)
    assert cb.investment == pytest.approx(45_500.0 * sum(present_worth(0.05, t) for t in range(1, 21)))
    assert cb.operation == 0.0 and cb.reliability == 0.0


def test_cost_example_line39():
    plan = empty_plan(case33(), lines=[39])
    cb = cost_breakdown(plan, case33(), check=False)
    assert cb.per_year[0].investment == pytest.approx(4_423.0)
    assert cb.line_investment == cb.investment


def test_cost_example_empty_plan():
    cb = cost_breakdown(empty_plan(toy4()), toy4())
    assert cb.total == 0.0
    assert len(cb.per_year) == 5


def test_extract_rejects_fractional_binaries():
    p = toy4()
    model, index = build_milp(p)
    x = np.zeros(model.num_vars)
    x[index.binary_columns()[0]] = 0.5
    sol = MilpSolution(MILP_OPTIMAL, x, 0.0, 0.0, 0.0, 1)
    with pytest.raises(IntegralityError):
        extract_plan(sol, index, p)


def test_high_load_sites_dg3_at_bus32():
    plan = plan33(load=2.0)
    dg3 = plan.der(3)
    assert dg3 is not None and dg3.bus == 32


def test_incumbent_satisfies_model():
    p = case33(load=2.0)
    model, index = build_milp(p)
    sol = solve_milp(model)
    assert sol.status == MILP_OPTIMAL
    assert check_solution(model, sol.incumbent, tol=1e-6).ok


def test_toy4_plan():
    plan = solve_two_stage(toy4())
    s1 = plan.stage_info.stage1_plan
    assert s1.objective == pytest.approx(478644.265070881, rel=1e-9)
    assert s1.installed_lines == (3,)
    assert s1.der(1).bus == 3 and s1.der(1).p_max == pytest.approx(0.36)


@settings(max_examples=12, deadline=None)
@given(TOY_SEEDS)
def test_plan_invariants_on_random_toys(seed):
    p = random_toy(seed)
    plan = solve_two_stage(p)
    chk = check_plan(plan, p)
    assert chk.ok, chk.failures
    econ = p.economics
    assert plan.dispatchable_capacity >= econ.critical_ratio * p.peak_demand - 1e-6
    assert np.all(np.abs(plan.dispatch.p_m) <= econ.poi_limit + 1e-6)
    for d in plan.installed_ders:
        assert d.bus in p.der_candidates[[c.id for c in p.der_candidates].index(d.id)].candidate_buses
    assert plan.costs.total == pytest.approx(plan.objective, rel=1e-6, abs=1e-6)
    assert plan.gap <= 1e-6


@settings(max_examples=8, deadline=None)
@given(TOY_SEEDS)
def test_islanded_periods_have_no_grid_exchange(seed):
    p = random_toy(seed)
    plan = solve_two_stage(p)
    for s, sc in enumerate(p.scenarios.scenarios):
        off = sc.u == 0
        assert np.all(np.abs(plan.dispatch.p_m[s, off]) <= 1e-7)


def test_two_stage_close_to_stage_one(base_plan33):
    info = base_plan33.stage_info
    assert abs(info.stage2_objective - info.stage1_objective) <= 0.01 * abs(info.stage1_objective)
    assert base_plan33.stage == 2


def test_iterate_mode_converges():
    plan = solve_two_stage(toy4(), SolveOptions(iterate=True))
    assert plan.stage_info.rounds >= 1
    assert plan.stage_info.max_dv_change <= 1e-4 or plan.stage_info.rounds == 10


def test_plan_serialisation_deterministic():
    p = toy4()
    a = json.dumps(plan_to_dict(solve_two_stage(p), p), sort_keys=True)
    b = json.dumps(plan_to_dict(solve_two_stage(p), p), sort_keys=True)
    assert a == b


def test_infeasible_critical_precheck():
    p = toy4(critical_ratio=1.0)
    ders = tuple(dataclasses.replace(d, p_cap=0.01) if d.kind is DerKind.DISPATCHABLE else d
                 for d in p.der_candidates)
    with pytest.raises(InfeasibleError):
        solve_two_stage(dataclasses.replace(p, der_candidates=ders))


def test_stage_two_with_flat_voltages_equals_stage_one():
    p = toy4()
    s1 = solve_stage(p, 1, None, SolveOptions())
    s2 = solve_stage(p, 2, np.zeros_like(s1.flows.dv), SolveOptions())
    assert s2.objective == pytest.approx(s1.objective, rel=1e-9)


def test_price_trend_operation_cost():
    # exports are sold at the market price, so dearer energy lowers operation cost
    low, high = plan33(price=0.2).costs, plan33(price=1.8).costs
    assert high.operation < 0 < low.operation
    assert high.investment >= low.investment
