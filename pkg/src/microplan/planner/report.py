"""Plan serialisation: a JSON summary and a per-period dispatch CSV."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..grid_model.types import DerKind

DIGITS = 9


def _num(v):
    v = float(v)
    r = round(v, DIGITS)
    return 0.0 if r == 0 else r


def _ders(plan):
    return [{"id": d.id, "name": d.name, "kind": d.kind.value, "bus": d.bus, "p_max_mw": _num(d.p_max),
             "c_max_mwh": _num(d.c_max)} for d in sorted(plan.installed_ders, key=lambda d: d.id)]


def plan_to_dict(plan, problem) -> dict:
    lines = {l.id: l for l in problem.lines}
    out = {
        "problem": problem.name,
        "status": plan.status,
        "stage": plan.stage,
        "objective": _num(plan.objective),
        "best_bound": _num(plan.best_bound),
        "gap": _num(plan.gap),
        "nodes": plan.nodes,
        "installed_ders": _ders(plan),
        "installed_lines": [{"id": l, "from_bus": lines[l].from_bus, "to_bus": lines[l].to_bus,
                             "annual_cost": _num(lines[l].annual_cost)} for l in plan.installed_lines],
    }
    if plan.costs is not None:
        out["costs"] = {k: _num(v) for k, v in plan.costs.as_dict().items()}
        out["costs"]["per_year"] = [{"year": y.year, "factor": _num(y.factor), "investment": _num(y.investment),
                                     "operation": _num(y.operation), "reliability": _num(y.reliability)}
                                    for y in plan.costs.per_year]
    info = plan.stage_info
    if info is not None:
        out["stages"] = {"stage1_objective": _num(info.stage1_objective),
                         "stage2_objective": _num(info.stage2_objective),
                         "max_dv_change": _num(info.max_dv_change), "rounds": info.rounds}
        if info.stage1_plan is not None:
            out["stages"]["stage1_installed_ders"] = _ders(info.stage1_plan)
            out["stages"]["stage1_installed_lines"] = list(info.stage1_plan.installed_lines)
    return out


def write_plan_json(plan, problem, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(plan_to_dict(plan, problem), indent=2, sort_keys=True) + "\n")
    return path


def dispatch_rows(plan, problem):
    """Yield a header then one row per scenario and period (MW, MVAr, p.u.)."""
    gens = [d for d in problem.der_candidates if d.kind is not DerKind.STORAGE]
    stores = [d for d in problem.der_candidates if d.kind is DerKind.STORAGE]
    header = ["scenario", "year", "day", "hour", "u", "p_m_mw", "q_m_mvar"]
    header += [f"p_der{d.id}_mw" for d in gens] + [f"q_der{d.id}_mvar" for d in gens]
    header += [f"pch_der{d.id}_mw" for d in stores] + [f"pdch_der{d.id}_mw" for d in stores]
    header += ["shed_mw", "min_dv_pu", "max_dv_pu"]
    yield header
    disp, fl = plan.dispatch, plan.flows
    for s, sc in enumerate(problem.scenarios.scenarios):
        for t, per in enumerate(problem.timeseries.periods):
            row = [sc.id, per.year, per.day, per.hour, int(sc.u[t]), disp.p_m[s, t], disp.q_m[s, t]]
            row += list(disp.p[s, t]) + list(disp.q[s, t]) + list(disp.p_ch[s, t]) + list(disp.p_dch[s, t])
            row += [disp.ls[s, t].sum(), fl.dv[s, t].min(initial=0.0), fl.dv[s, t].max(initial=0.0)]
            yield [v if isinstance(v, (int, np.integer)) else f"{_num(v):.6f}" for v in row]


def write_dispatch_csv(plan, problem, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in dispatch_rows(plan, problem):
            writer.writerow(row)
    return path
