"""Exhaustive enumeration of siting/line decisions for tiny cases.

Each assignment of the binaries is fixed and the remaining LP is handed
to SciPy's HiGHS directly, so the result does not depend on this
package's simplex or branch-and-bound.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import InfeasibleError, TooManyBinaries
from ..milp import MILP_OPTIMAL, MilpSolution
from ..planner.formulation import build_milp
from ..planner.solution import PlanSolution, extract_plan

BINARY_LIMIT = 14


def _choices(index, problem):
    """Per-DER siting options (None or one bus) and per-line on/off; respects one bus per DER."""
    per_der = []
    for d in problem.der_candidates:
        per_der.append([None] + list(d.candidate_buses))
    per_line = [(lid, (0, 1)) for lid in index.z]
    return per_der, per_line


def _lp(model, lb, ub):
    A = model.A.tocsr()
    lo, hi = model.row_lo, model.row_hi
    eq = lo == hi
    up = ~eq & np.isfinite(hi)
    dn = ~eq & np.isfinite(lo)
    A_ub = sp.vstack([A[up], -A[dn]], format="csr")
    b_ub = np.concatenate([hi[up], -lo[dn]])
    res = linprog(model.objective, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A[eq] if eq.any() else None, b_eq=lo[eq] if eq.any() else None,
                  bounds=np.column_stack([lb, ub]), method="highs")
    return res


def brute_force_plan(problem, binary_limit: int = BINARY_LIMIT, stage: int = 1, dv_hat=None) -> PlanSolution:
    """Minimum-cost plan by trying every binary assignment.

    ``nodes`` of the returned plan counts the LPs solved. Costs are not
    attached; the plan is checked against the physical invariants.

    Raises
    ------
    TooManyBinaries
        The model has more than ``binary_limit`` binaries.
    InfeasibleError
        No assignment admits a feasible dispatch.
    """
    model, index = build_milp(problem, stage, dv_hat)
    nbin = len(index.x) + len(index.z)
    if nbin > binary_limit:
        raise TooManyBinaries(f"{nbin} binaries exceed the enumeration limit {binary_limit}")
    per_der, per_line = _choices(index, problem)
    ders = problem.der_candidates
    best = None
    tried = feasible = 0
    for siting in itertools.product(*per_der):
        for switch in itertools.product(*[v for _, v in per_line]):
            lb = model.lb.copy()
            ub = model.ub.copy()
            for d, bus in zip(ders, siting):
                for m in d.candidate_buses:
                    col = index.x[(d.id, m)]
                    lb[col] = ub[col] = 1.0 if m == bus else 0.0
            for (lid, _), on in zip(per_line, switch):
                col = index.z[lid]
                lb[col] = ub[col] = float(on)
            res = _lp(model, lb, ub)
            tried += 1
            if res.status != 0:
                continue
            feasible += 1
            obj = float(res.fun) + model.obj_offset
            if best is None or obj < best[0] - 1e-12 * max(1.0, abs(obj)):
                best = (obj, res.x, siting, switch)
    if best is None:
        raise InfeasibleError(f"all {tried} assignments are infeasible")
    obj, x, _, _ = best
    sol = MilpSolution(status=MILP_OPTIMAL, incumbent=np.clip(x, model.lb, model.ub), objective_value=obj,
                       best_bound=obj, gap=0.0, nodes_explored=tried)
    return extract_plan(sol, index, problem)
