"""LP relaxation solves with independently recomputed optimality certificates."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import NumericalFailure
from .model import MilpModel
from .simplex import Basis, SimplexLP

log = logging.getLogger(__name__)

OPTIMAL, INFEASIBLE, UNBOUNDED = "Optimal", "Infeasible", "Unbounded"

GAP_TARGET = 1e-6
RESIDUAL_TARGET = 1e-8

#: row count above which ``backend="auto"`` hands the LP to HiGHS
AUTO_SIMPLEX_ROWS = 2500
# tried in order until one result certifies
HIGHS_ATTEMPTS = (
    ("highs-ds", {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}),
    ("highs-ds", {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10, "presolve": False}),
    ("highs-ds", {}),
    ("highs-ipm", {}),
)


@dataclass
class Residuals:
    primal: float  # max scaled bound/row violation
    dual: float  # max reduced-cost sign violation (scaled)
    gap: float  # |primal obj - dual obj| / (1 + |primal obj|)


@dataclass
class LpSolution:
    status: str
    primal: np.ndarray
    dual: np.ndarray
    objective_value: float
    dual_objective: float = np.nan
    reduced_costs: np.ndarray | None = None
    residuals: Residuals | None = None
    iterations: int = 0
    backend: str = ""
    basis: Basis | None = field(default=None, repr=False)
    farkas: np.ndarray | None = None
    ray: np.ndarray | None = None

    @property
    def certified(self) -> bool:
        r = self.residuals
        return (self.status == OPTIMAL and r is not None
                and r.gap <= GAP_TARGET and r.primal <= RESIDUAL_TARGET)


def primal_violation(model: MilpModel, x, lb=None, ub=None) -> float:
    """Largest bound or row violation, each divided by ``1 + |bound|``."""
    lb = model.lb if lb is None else lb
    ub = model.ub if ub is None else ub
    x = np.asarray(x, dtype=float)
    worst = 0.0
    with np.errstate(invalid="ignore"):
        for val, lo, hi in ((x, lb, ub), (model.A @ x, model.row_lo, model.row_hi)):
            if val.size == 0:
                continue
            v_lo = np.where(np.isfinite(lo), (lo - val) / (1.0 + np.abs(lo)), 0.0)
            v_hi = np.where(np.isfinite(hi), (val - hi) / (1.0 + np.abs(hi)), 0.0)
            worst = max(worst, float(np.max(v_lo, initial=0.0)), float(np.max(v_hi, initial=0.0)))
    return worst


def _dual_side(mult, lo, hi, scale):
    """Dual objective contribution and sign violation for one block of multipliers.

    A positive multiplier prices the lower side, a negative one the upper
    side. Multipliers below ``scale * 1e-9`` on a missing side count as zero.
    """
    tiny = 1e-9 * scale
    pos = mult > tiny
    neg = mult < -tiny
    viol = 0.0
    bad_pos = pos & ~np.isfinite(lo)
    bad_neg = neg & ~np.isfinite(hi)
    if bad_pos.any():
        viol = max(viol, float(np.abs(mult[bad_pos]).max()))
    if bad_neg.any():
        viol = max(viol, float(np.abs(mult[bad_neg]).max()))
    good_pos = pos & np.isfinite(lo)
    good_neg = neg & np.isfinite(hi)
    value = float(mult[good_pos] @ lo[good_pos]) + float(mult[good_neg] @ hi[good_neg])
    return value, viol


def certify(model: MilpModel, x, y, lb=None, ub=None):
    """Recompute objective values and residuals from a primal/dual pair.

    The dual objective uses only ``y`` and the data; reduced costs are
    ``c - A^T y``. Returns ``(dual objective, reduced costs, Residuals)``.
    """
    lb = model.lb if lb is None else np.asarray(lb, dtype=float)
    ub = model.ub if ub is None else np.asarray(ub, dtype=float)
    c = model.objective
    d = c - model.A.T @ y
    scale = 1.0 + float(np.abs(c).max(initial=0.0))
    row_val, row_viol = _dual_side(y, model.row_lo, model.row_hi, scale)
    col_val, col_viol = _dual_side(d, lb, ub, scale)
    dual_obj = row_val + col_val + model.obj_offset
    primal_obj = model.evaluate(x)
    res = Residuals(
        primal=primal_violation(model, x, lb, ub),
        dual=max(row_viol, col_viol) / scale,
        gap=abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj)),
    )
    return dual_obj, d, res


class LpEngine:
    """Reusable LP solver for one matrix; bounds vary per call.

    ``backend`` is ``"simplex"`` (the in-house revised simplex),
    ``"highs"`` (SciPy's HiGHS dual simplex) or ``"auto"``.
    """

    def __init__(self, model: MilpModel, backend: str = "auto"):
        if backend == "auto":
            backend = "simplex" if model.num_rows <= AUTO_SIMPLEX_ROWS else "highs"
        if backend not in ("simplex", "highs"):
            raise ValueError(f"unknown LP backend {backend!r}")
        self.model = model
        self.backend = backend
        self._simplex = SimplexLP(model.objective, model.A, model.row_lo, model.row_hi) if backend == "simplex" else None

    def solve(self, lb=None, ub=None, warm: Basis | None = None) -> LpSolution:
        model = self.model
        lb = model.lb if lb is None else np.asarray(lb, dtype=float)
        ub = model.ub if ub is None else np.asarray(ub, dtype=float)
        if np.any(lb > ub):
            return LpSolution(INFEASIBLE, np.full(model.num_vars, np.nan), np.zeros(model.num_rows),
                              np.inf, backend=self.backend)
        if self.backend == "simplex":
            sol = self._solve_simplex(lb, ub, warm)
            if sol.status == OPTIMAL and not sol.certified:
                log.debug("simplex result failed certification (%s); retrying cold", sol.residuals)
                sol = self._solve_simplex(lb, ub, None)
        else:
            sol = self._solve_highs(lb, ub)
        if sol.status == OPTIMAL and not sol.certified:
            raise NumericalFailure(f"LP could not be certified: {sol.residuals}")
        return sol

    def _solve_simplex(self, lb, ub, warm) -> LpSolution:
        model = self.model
        res = self._simplex.solve(lb, ub, warm=warm)
        if res.status == "optimal":
            x = np.clip(res.x, lb, ub)
            dual_obj, d, resid = certify(model, x, res.y, lb, ub)
            return LpSolution(OPTIMAL, x, res.y, model.evaluate(x), dual_obj, d, resid,
                              res.iterations, "simplex", res.basis)
        status = INFEASIBLE if res.status == "infeasible" else UNBOUNDED
        obj = np.inf if status == INFEASIBLE else -np.inf
        return LpSolution(status, res.x, np.zeros(model.num_rows), obj, iterations=res.iterations,
                          backend="simplex", basis=res.basis, farkas=res.farkas, ray=res.ray)

    def _solve_highs(self, lb, ub) -> LpSolution:
        from scipy.optimize import linprog

        model = self.model
        A = model.A.tocsr()
        lo, hi = model.row_lo, model.row_hi
        eq = lo == hi
        up = ~eq & np.isfinite(hi)
        dn = ~eq & np.isfinite(lo)
        A_ub = sp.vstack([A[up], -A[dn]], format="csr")
        b_ub = np.concatenate([hi[up], -lo[dn]])
        bounds = np.column_stack([np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf)])
        sol = None
        for method, opts in HIGHS_ATTEMPTS:
            res = linprog(
                model.objective,
                A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                A_eq=A[eq] if eq.any() else None, b_eq=lo[eq] if eq.any() else None,
                bounds=bounds, method=method, options=opts,
            )
            if res.status == 2:
                return LpSolution(INFEASIBLE, np.full(model.num_vars, np.nan), np.zeros(model.num_rows), np.inf,
                                  iterations=int(res.nit), backend="highs")
            if res.status == 3:
                return LpSolution(UNBOUNDED, np.full(model.num_vars, np.nan), np.zeros(model.num_rows), -np.inf,
                                  iterations=int(res.nit), backend="highs")
            if res.status != 0:
                log.debug("HiGHS %s %s: status %d, trying next settings", method, opts, res.status)
                continue
            y = np.zeros(model.num_rows)
            y[eq] = res.eqlin.marginals
            n_up = int(up.sum())
            y[up] += res.ineqlin.marginals[:n_up]
            y[dn] -= res.ineqlin.marginals[n_up:]
            x = np.clip(res.x, lb, ub)
            dual_obj, d, resid = certify(model, x, y, lb, ub)
            sol = LpSolution(OPTIMAL, x, y, model.evaluate(x), dual_obj, d, resid, int(res.nit), "highs")
            if sol.certified:
                return sol
        if sol is None:
            raise NumericalFailure(f"HiGHS failed with every setting (last status {res.status}: {res.message})")
        return sol


def solve_lp(model: MilpModel, backend: str = "auto") -> LpSolution:
    """Solve the continuous relaxation of ``model`` (integrality ignored).

    Returns an ``Optimal`` solution whose primal/dual pair has been
    re-verified, or ``Infeasible`` / ``Unbounded``. Raises
    :class:`NumericalFailure` when certification fails twice.
    """
    return LpEngine(model, backend).solve()
