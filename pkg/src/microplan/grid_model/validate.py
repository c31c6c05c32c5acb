"""Invariant checks on a :class:`PlanningProblem`; violations are returned, not raised."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import DAYS_PER_YEAR, DerKind, PlanningProblem

WEIGHT_TOL = 1e-6


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.code} [{self.subject}]: {self.message}"


def validate(problem: PlanningProblem, weight_tol: float = WEIGHT_TOL) -> list[Violation]:
    out: list[Violation] = []

    def flag(code, subject, message):
        out.append(Violation(code, subject, message))

    buses = problem.buses
    if not buses:
        flag("no_buses", "buses", "bus list is empty")
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        flag("duplicate_bus", "buses", "bus ids are not unique")
    n_poi = sum(b.is_poi for b in buses)
    if buses and n_poi != 1:
        flag("poi_count", "buses", f"{n_poi} buses flagged as point of interconnection, need exactly 1")
    for b in buses:
        if not (b.dv_min <= 0.0 <= b.dv_max):
            flag("dv_bounds", f"bus {b.id}", f"need dv_min <= 0 <= dv_max, got [{b.dv_min}, {b.dv_max}]")
    bus_set = set(ids)

    line_ids = [l.id for l in problem.lines]
    if len(set(line_ids)) != len(line_ids):
        flag("duplicate_line", "lines", "line ids are not unique")
    for l in problem.lines:
        subject = f"line {l.id}"
        if l.from_bus == l.to_bus:
            flag("line_self_loop", subject, "from_bus equals to_bus")
        if l.from_bus not in bus_set or l.to_bus not in bus_set:
            flag("line_unknown_bus", subject, f"endpoint {l.from_bus}-{l.to_bus} not in bus set")
        if not l.g > 0:
            flag("line_conductance", subject, f"g must be positive, got {l.g}")
        if not (l.p_limit_mw > 0 and l.q_limit_mvar > 0):
            flag("line_limit", subject, "flow limits must be positive")
        if not l.is_candidate and l.annual_cost != 0:
            flag("existing_line_cost", subject, "existing lines carry no investment cost")
        if l.annual_cost < 0:
            flag("line_cost", subject, "annual cost is negative")

    ts = problem.timeseries
    T = ts.num_periods
    der_ids = [d.id for d in problem.der_candidates]
    if len(set(der_ids)) != len(der_ids):
        flag("duplicate_der", "ders", "DER ids are not unique")
    for d in problem.der_candidates:
        subject = f"der {d.id}"
        if not d.p_cap > 0:
            flag("der_p_cap", subject, "p_cap must be positive")
        if d.kind is DerKind.STORAGE:
            if not d.e_cap > 0:
                flag("der_e_cap", subject, "storage e_cap must be positive")
            if not (0 < d.efficiency <= 1):
                flag("der_efficiency", subject, "storage efficiency must lie in (0, 1]")
        if not d.candidate_buses or any(m not in bus_set for m in d.candidate_buses):
            flag("der_buses", subject, "candidate buses empty or unknown")
        if d.q_ratio < 0:
            flag("der_q_ratio", subject, "q_ratio must be non-negative")
        if min(d.annual_cost_power, d.annual_cost_energy, d.gen_price) < 0:
            flag("der_cost", subject, "costs must be non-negative")
        if d.kind is DerKind.NONDISPATCHABLE and d.profile_id not in ts.gen_profiles:
            flag("der_profile", subject, f"profile {d.profile_id!r} not found")

    shape_ok = (ts.load_p.shape == (T, len(buses)) and ts.load_q.shape == (T, len(buses))
                and ts.price.shape == (T,)
                and all(v.shape == (T,) for v in ts.gen_profiles.values()))
    if T == 0:
        flag("no_periods", "profiles", "no periods defined")
    if not shape_ok:
        flag("profile_shape", "profiles", "profiles do not share the period index set")
    else:
        if np.any(ts.load_p < 0):
            flag("negative_load", "profiles", "load_p must be non-negative")
        for k, v in ts.gen_profiles.items():
            if np.any(v < 0) or np.any(v > 1):
                flag("profile_range", f"profile {k}", "normalised output must lie in [0, 1]")
    for (year, day), idx in ts.days().items():
        hours = [ts.periods[k].hour for k in idx]
        weights = {ts.periods[k].weight for k in idx}
        if len(set(hours)) != len(hours):
            flag("duplicate_hour", f"year {year} day {day}", "hour repeated within a day")
        if len(weights) != 1:
            flag("day_weight", f"year {year} day {day}", "periods of one day disagree on weight")
    for year in ts.years:
        day_weights = {}
        for p in ts.periods:
            if p.year == year:
                day_weights[p.day] = p.weight
        total = sum(day_weights.values())
        if abs(total - DAYS_PER_YEAR) > weight_tol:
            flag("year_weight", f"year {year}", f"day weights sum to {total}, expected {DAYS_PER_YEAR}")
    if ts.periods and (ts.years[0] != 1 or ts.years[-1] > problem.economics.horizon_years):
        flag("year_coverage", "profiles", "modelled years must start at 1 and lie within the horizon")

    sc = problem.scenarios
    s_ids = [s.id for s in sc.scenarios]
    if len(set(s_ids)) != len(s_ids):
        flag("duplicate_scenario", "scenarios", "scenario ids are not unique")
    grid = [s for s in sc.scenarios if s.id == sc.grid_scenario_id]
    if not grid:
        flag("grid_scenario", "scenarios", "grid-connected scenario missing")
    elif grid[0].u.shape == (T,) and not np.all(grid[0].u == 1):
        flag("grid_scenario", "scenarios", "grid-connected scenario must have u = 1 in every period")
    for s in sc.scenarios:
        if s.probability < 0:
            flag("probability", f"scenario {s.id}", "probability is negative")
        if s.u.shape != (T,):
            flag("islanding_shape", f"scenario {s.id}", "islanding signal length differs from period count")
        elif not np.all((s.u == 0) | (s.u == 1)):
            flag("islanding_signal", f"scenario {s.id}", "islanding signal must be 0 or 1")

    e = problem.economics
    if e.discount_rate < 0:
        flag("discount_rate", "economics", "discount rate is negative")
    if not e.voll > 0:
        flag("voll", "economics", "VOLL must be positive")
    if not (0 <= e.critical_ratio <= 1):
        flag("critical_ratio", "economics", "critical ratio must lie in [0, 1]")
    if not e.poi_limit > 0:
        flag("poi_limit", "economics", "POI limit must be positive")
    if not e.poi_q > 0:
        flag("poi_q_limit", "economics", "POI reactive limit must be positive")
    if e.horizon_years < 1:
        flag("horizon", "economics", "horizon must be at least one year")
    if e.big_m is not None and not e.big_m > 0:
        flag("big_m", "economics", "big-M must be positive")
    if not (problem.base_mva > 0 and problem.base_kv > 0):
        flag("base", "problem", "base quantities must be positive")

    if shape_ok and T:
        dispatchable = sum(d.p_cap for d in problem.der_candidates if d.kind is DerKind.DISPATCHABLE)
        need = e.critical_ratio * ts.peak_demand
        if dispatchable < need:
            flag("critical_capacity", "ders",
                 f"dispatchable candidate capacity {dispatchable:g} MW below critical load {need:g} MW")
    return out
