import csv
import dataclasses
import math

import numpy as np
import pytest

from conftest import case33
from microplan.errors import Diverged, InfeasibleError, IslandedBus, TooManyBinaries
from microplan.grid_model import DerKind, Line, LineStatus, random_toy, toy4
from microplan.milp import solve_lp
from microplan.oracle import ac_power_flow, admittance_matrix, brute_force_plan, linearization_audit
from microplan.planner import SolveOptions, build_milp, solve_stage


def two_bus_line(r_pu=0.02, x_pu=0.04, base_mva=10.0):
    z = complex(r_pu, x_pu)
    y = 1 / z
    return Line(1, 1, 2, 0.0, 0.0, y.real, y.imag, 5.0, 5.0)


def closed_form_v2(p_pu, q_pu, r, x):
    """Receiving-end magnitude of a two-bus feeder with V1 = 1 and load P + jQ at bus 2."""
    a = 1.0 - 2.0 * (r * p_pu + x * q_pu)
    disc = a * a - 4.0 * (r * r + x * x) * (p_pu * p_pu + q_pu * q_pu)
    return math.sqrt((a + math.sqrt(disc)) / 2.0)


def test_two_bus_zero_load_is_flat():
    res = ac_power_flow((1, 2), 1, [two_bus_line()], [0.0, 0.0], [0.0, 0.0], 10.0)
    assert res.iterations == 0
    assert np.allclose(res.v, 1.0)
    assert res.losses_mw == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("p_mw,q_mvar", [(1.0, 0.5), (3.0, 1.0), (0.5, -0.2)])
def test_two_bus_closed_form(p_mw, q_mvar):
    r, x, base = 0.02, 0.04, 10.0
    res = ac_power_flow((1, 2), 1, [two_bus_line(r, x)], [0.0, -p_mw], [0.0, -q_mvar], base)
    v2 = closed_form_v2(p_mw / base, q_mvar / base, r, x)
    assert res.voltage(2) == pytest.approx(v2, abs=1e-9)
    s2 = (p_mw / base) ** 2 + (q_mvar / base) ** 2
    sending = p_mw / base + r * s2 / v2 ** 2
    assert res.p_from[0] / base == pytest.approx(sending, abs=1e-9)
    assert res.slack_p == pytest.approx(res.p_from[0], abs=1e-9)


def test_admittance_matrix_rows_sum_to_zero():
    Y = admittance_matrix(3, [(0, 1), (1, 2)], np.array([1 - 2j, 3 - 1j]))
    assert np.allclose(Y.sum(axis=1), 0)
    assert np.allclose(Y, Y.T)


def test_case33_nominal_flow(base33):
    p = base33
    pos = p.bus_position
    t = int(np.argmax(p.timeseries.load_p.sum(axis=1)))
    scale = 1.0 / p.timeseries.load_p[t].sum() * 3.715
    load_p = p.timeseries.load_p[t] * scale
    load_q = p.timeseries.load_q[t] * scale
    existing = [l for l in p.lines if not l.is_candidate]
    res = ac_power_flow(p.bus_ids, 1, existing, -load_p, -load_q, p.base_mva)
    assert res.converged and res.iterations <= 5
    k = int(np.argmin(res.v))
    assert p.bus_ids[k] == 18
    assert res.v[k] == pytest.approx(0.9131, abs=5e-4)
    assert res.losses_mw * 1000 == pytest.approx(202.7, abs=0.5)
    assert pos[1] == 0


def test_injections_self_consistent():
    p = case33()
    existing = [l for l in p.lines if not l.is_candidate]
    rng = np.random.default_rng(0)
    pin = -rng.uniform(0, 0.1, 33)
    qin = -rng.uniform(0, 0.05, 33)
    res = ac_power_flow(p.bus_ids, 1, existing, pin, qin, p.base_mva)
    pos = p.bus_position
    net = np.zeros(33)
    for j, l in enumerate(existing):
        net[pos[l.from_bus]] += res.p_from[j]
        net[pos[l.to_bus]] += res.p_to[j]
    assert np.abs(net[1:] - pin[1:]).max() <= 1e-7
    assert net[0] == pytest.approx(res.slack_p, abs=1e-7)


def test_islanded_bus_detected():
    with pytest.raises(IslandedBus):
        ac_power_flow((1, 2, 3), 1, [two_bus_line()], [0, 0, 0], [0, 0, 0], 10.0)


def test_divergence_reported():
    with pytest.raises(Diverged):
        ac_power_flow((1, 2), 1, [two_bus_line(0.5, 0.5)], [0.0, -100.0], [0.0, -100.0], 10.0)


def test_zero_load_audit_is_exact():
    p = toy4().scaled(load=0.0, price=1.0)
    plan = solve_stage(p, 1, None, SolveOptions())
    rep = linearization_audit(plan, p)
    assert rep.periods_audited == 4
    assert rep.buses_excluded == (3, 4)
    assert rep.max_abs_p_error <= 1e-9
    assert rep.max_abs_dv_error <= 1e-9


def test_audit_wide_bounds_negative_control():
    p = case33(dv=0.20)
    plan = solve_stage(p, 1, None, SolveOptions())
    rep = linearization_audit(plan, p)
    assert rep.max_rel_limit_error > 0.02


def test_audit_csv(tmp_path):
    p = toy4()
    plan = solve_stage(p, 1, None, SolveOptions())
    rep = linearization_audit(plan, p)
    path = rep.write_csv(tmp_path / "a.csv")
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(rep.rows)
    assert set(rows[0]) == {"stage", "scenario", "period", "element", "quantity", "linear", "ac", "abs_error"}
    worst = max(float(r["abs_error"]) for r in rows if r["quantity"] == "p_flow_mw")
    assert worst == pytest.approx(rep.max_abs_p_error, abs=1e-8)


def test_audit_skips_islanded_periods():
    for seed in range(20):
        p = random_toy(seed)
        if any((s.u == 0).any() for s in p.scenarios.scenarios):
            break
    plan = solve_stage(p, 1, None, SolveOptions())
    every = list(range(len(p.scenarios)))
    rep = linearization_audit(plan, p, scenarios=every)
    off = sum(int((s.u == 0).sum()) for s in p.scenarios.scenarios)
    assert len(rep.periods_skipped) == off
    assert rep.periods_audited + off == len(every) * p.timeseries.num_periods


def test_brute_force_toy4_golden():
    plan = brute_force_plan(toy4())
    assert plan.objective == pytest.approx(478644.265070881, rel=1e-9)
    assert plan.installed_lines == (3,)
    assert plan.nodes == 2 * 2 * 2 * 2


def test_brute_force_without_binaries_is_plain_lp():
    p = toy4()
    lines = tuple(dataclasses.replace(l, status=LineStatus.EXISTING, annual_cost=0.0) for l in p.lines)
    p = dataclasses.replace(p, lines=lines, der_candidates=(),
                            economics=dataclasses.replace(p.economics, critical_ratio=0.0))
    model, _ = build_milp(p)
    assert model.binary_indices.size == 0
    assert brute_force_plan(p).objective == pytest.approx(solve_lp(model).objective_value, rel=1e-9)


def test_brute_force_infeasible():
    p = toy4(critical_ratio=1.0)
    p = dataclasses.replace(p, der_candidates=tuple(d for d in p.der_candidates if d.kind is DerKind.STORAGE))
    with pytest.raises(InfeasibleError):
        brute_force_plan(p)


def test_brute_force_refuses_large_models(base33):
    with pytest.raises(TooManyBinaries):
        brute_force_plan(base33)


def test_brute_matches_planner_on_random_toys():
    for seed in range(4):
        p = random_toy(seed)
        ref = brute_force_plan(p)
        got = solve_stage(p, 1, None, SolveOptions())
        assert got.objective == pytest.approx(ref.objective, rel=1e-6, abs=1e-6)
