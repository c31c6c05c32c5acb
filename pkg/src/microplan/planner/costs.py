"""Cost accounting recomputed from a plan's primitive quantities."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MismatchError
from ..grid_model.types import DerKind, PlanningProblem, present_worth

MISMATCH_TOL = 1e-6


@dataclass(frozen=True)
class YearCost:
    year: int
    factor: float  # present-worth factor
    investment: float  # undiscounted $
    operation: float
    reliability: float

    @property
    def total(self) -> float:
        return self.investment + self.operation + self.reliability


@dataclass(frozen=True)
class CostBreakdown:
    """Discounted cost totals in dollars.

    ``investment`` splits into ``der_investment`` and ``line_investment``;
    ``operation`` into ``generation`` and ``grid_purchase``.
    """

    investment: float
    operation: float
    reliability: float
    der_investment: float
    line_investment: float
    generation: float
    grid_purchase: float
    per_year: tuple = field(default=(), repr=False)

    @property
    def total(self) -> float:
        return self.investment + self.operation + self.reliability

    def as_dict(self) -> dict:
        return {"investment": self.investment, "operation": self.operation, "reliability": self.reliability,
                "total": self.total, "der_investment": self.der_investment,
                "line_investment": self.line_investment, "generation": self.generation,
                "grid_purchase": self.grid_purchase}


def cost_breakdown(plan, problem: PlanningProblem, tol: float = MISMATCH_TOL, check: bool = True) -> CostBreakdown:
    """Recompute investment, operation and reliability cost of ``plan``.

    Every calendar year of the horizon pays the annualised investment
    cost; its operation and reliability costs come from the profiles of
    the latest modelled year not after it. Operation is charged on the
    grid-connected scenario, reliability is probability weighted over all
    scenarios.

    Raises
    ------
    MismatchError
        If ``check`` and the total differs from ``plan.objective`` by more
        than ``tol`` relative.
    """
    econ = problem.economics
    ts = problem.timeseries
    scen = problem.scenarios.scenarios
    g_pos = problem.scenarios.grid_position
    cand = {d.id: d for d in problem.der_candidates}
    line_cost = {l.id: l.annual_cost for l in problem.lines}
    gens = [d for d in problem.der_candidates if d.kind is not DerKind.STORAGE]

    der_ic = 0.0
    for d in plan.installed_ders:
        c = cand[d.id]
        der_ic += c.annual_cost_power * d.p_max
        if c.kind is DerKind.STORAGE:
            der_ic += c.annual_cost_energy * d.c_max
    line_ic = sum(line_cost[l] for l in plan.installed_lines)

    w = ts.weights
    years = np.array([p.year for p in ts.periods])
    disp = plan.dispatch
    gen_price = np.array([d.gen_price if d.kind is DerKind.DISPATCHABLE else 0.0 for d in gens])
    gen_hourly = disp.p[g_pos] @ gen_price if gens else np.zeros(ts.num_periods)
    grid_hourly = disp.p_m[g_pos] * ts.price
    shed = disp.ls.sum(axis=2)  # [scenario, period] MW
    probs = np.array([s.probability for s in scen])
    rel_hourly = econ.voll * (probs @ shed)

    per_year = []
    tot = dict(der=0.0, line=0.0, gen=0.0, grid=0.0, rel=0.0)
    for t in range(1, econ.horizon_years + 1):
        kappa = present_worth(econ.discount_rate, t)
        owner = problem.year_owner(t)
        mask = years == owner if owner is not None else np.zeros(len(years), dtype=bool)
        gen_t = float(np.sum(w[mask] * gen_hourly[mask]))
        grid_t = float(np.sum(w[mask] * grid_hourly[mask]))
        rel_t = float(np.sum(w[mask] * rel_hourly[mask]))
        per_year.append(YearCost(t, kappa, der_ic + line_ic, gen_t + grid_t, rel_t))
        tot["der"] += kappa * der_ic
        tot["line"] += kappa * line_ic
        tot["gen"] += kappa * gen_t
        tot["grid"] += kappa * grid_t
        tot["rel"] += kappa * rel_t

    out = CostBreakdown(investment=tot["der"] + tot["line"], operation=tot["gen"] + tot["grid"],
                        reliability=tot["rel"], der_investment=tot["der"], line_investment=tot["line"],
                        generation=tot["gen"], grid_purchase=tot["grid"], per_year=tuple(per_year))
    if check:
        ref = plan.objective
        if abs(out.total - ref) > tol * max(1.0, abs(ref)):
            raise MismatchError(f"recomputed cost {out.total:.6f} differs from solver objective {ref:.6f}")
    return out
