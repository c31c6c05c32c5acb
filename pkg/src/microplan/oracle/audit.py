"""Compare the planner's linearised flows against a full AC power flow."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..grid_model.types import DerKind
from .acflow import _connected, ac_power_flow


@dataclass
class AuditRow:
    scenario: int
    period: int
    element: str  # "line <id>" or "bus <id>"
    quantity: str  # "p_flow_mw", "q_flow_mvar" or "dv_pu"
    linear: float
    ac: float

    @property
    def abs_error(self) -> float:
        return abs(self.linear - self.ac)


@dataclass
class AuditReport:
    """Errors of the linear model against AC, over all audited periods.

    ``max_rel_limit_error`` is the largest active-flow error divided by
    the line's active limit.
    """

    stage: int
    max_abs_p_error: float  # MW
    mean_abs_p_error: float
    max_rel_limit_error: float
    max_abs_dv_error: float  # p.u.
    mean_abs_dv_error: float
    max_abs_q_error: float
    periods_audited: int
    periods_skipped: list = field(default_factory=list)
    buses_excluded: tuple = ()  # not connected to the POI by built lines
    rows: list = field(default_factory=list, repr=False)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["stage", "scenario", "period", "element", "quantity", "linear", "ac", "abs_error"])
            for r in self.rows:
                w.writerow([self.stage, r.scenario, r.period, r.element, r.quantity, f"{r.linear:.9f}",
                            f"{r.ac:.9f}", f"{r.abs_error:.9f}"])
        return path


def bus_injections(plan, problem, s, t):
    """Net injections (MW, MVAr) per bus of scenario position ``s``, period ``t``, excluding the POI."""
    pos = problem.bus_position
    ts = problem.timeseries
    p = -(ts.load_p[t] - plan.dispatch.ls[s, t])
    q = -ts.load_q[t].copy()
    built = {d.id: d for d in plan.installed_ders}
    gens = [d for d in problem.der_candidates if d.kind is not DerKind.STORAGE]
    stores = [d for d in problem.der_candidates if d.kind is DerKind.STORAGE]
    for k, d in enumerate(gens):
        if d.id in built:
            p[pos[built[d.id].bus]] += plan.dispatch.p[s, t, k]
            q[pos[built[d.id].bus]] += plan.dispatch.q[s, t, k]
    for k, d in enumerate(stores):
        if d.id in built:
            p[pos[built[d.id].bus]] += plan.dispatch.p_dch[s, t, k] - plan.dispatch.p_ch[s, t, k]
    return p, q


def linearization_audit(plan, problem, scenarios=None) -> AuditReport:
    """Re-solve every grid-connected period of ``plan`` with AC power flow.

    The DER dispatch, storage and shed load of the plan are injected at
    their buses; the POI balances the rest. Built lines only. Islanded
    periods (no slack) are skipped and listed in ``periods_skipped``.
    Buses cut off from the POI by unbuilt candidate lines are supplied
    locally in the plan; they have no slack and are left out of the AC
    solve (``buses_excluded``).
    """
    base = problem.base_mva
    scen = problem.scenarios.scenarios
    if scenarios is None:
        scenarios = [problem.scenarios.grid_position]
    on = set(plan.installed_lines)
    in_service = [(k, l) for k, l in enumerate(problem.lines) if not l.is_candidate or l.id in on]
    lines = [l for _, l in in_service]
    cols = np.array([k for k, _ in in_service], dtype=np.int64)
    poi = problem.poi_bus.id
    pos = problem.bus_position
    reach = _connected(len(problem.buses), [(pos[l.from_bus], pos[l.to_bus]) for l in lines], pos[poi])
    keep = np.flatnonzero(reach)
    bus_ids = tuple(problem.bus_ids[k] for k in keep)
    excluded = tuple(problem.bus_ids[k] for k in np.flatnonzero(~reach))
    rows = []
    p_err, q_err, rel_err, dv_err = [], [], [], []
    skipped = []
    audited = 0
    for s in scenarios:
        for t in range(problem.timeseries.num_periods):
            if scen[s].u[t] == 0:
                skipped.append((scen[s].id, t))
                continue
            p, q = bus_injections(plan, problem, s, t)
            res = ac_power_flow(bus_ids, poi, lines, p[keep], q[keep], base, period=t)
            audited += 1
            pl_lin = plan.flows.pl[s, t, cols] * base
            ql_lin = plan.flows.ql[s, t, cols] * base
            for j, l in enumerate(lines):
                rows.append(AuditRow(scen[s].id, t, f"line {l.id}", "p_flow_mw", pl_lin[j], res.p_from[j]))
                rows.append(AuditRow(scen[s].id, t, f"line {l.id}", "q_flow_mvar", ql_lin[j], res.q_from[j]))
                e = abs(pl_lin[j] - res.p_from[j])
                p_err.append(e)
                rel_err.append(e / l.p_limit_mw)
                q_err.append(abs(ql_lin[j] - res.q_from[j]))
            dv_ac = res.v - 1.0
            for j, (m, b) in enumerate(zip(keep, bus_ids)):
                rows.append(AuditRow(scen[s].id, t, f"bus {b}", "dv_pu", plan.flows.dv[s, t, m], dv_ac[j]))
                dv_err.append(abs(plan.flows.dv[s, t, m] - dv_ac[j]))

    def stat(v, f):
        return float(f(v)) if v else 0.0

    return AuditReport(stage=plan.stage, max_abs_p_error=stat(p_err, max), mean_abs_p_error=stat(p_err, np.mean),
                       max_rel_limit_error=stat(rel_err, max), max_abs_dv_error=stat(dv_err, max),
                       mean_abs_dv_error=stat(dv_err, np.mean), max_abs_q_error=stat(q_err, max),
                       periods_audited=audited, periods_skipped=skipped, buses_excluded=excluded, rows=rows)
