"""Bounded revised simplex with a sparse LU basis and product-form updates.

The LP ``min c.x, row_lo <= A x <= row_hi, lb <= x <= ub`` is held as
``[A  -I] [x; s] = 0`` where each logical ``s_i = a_i.x`` carries the row
bounds. The slack basis is always a valid start. Primal simplex uses a
composite phase 1 (sum of infeasibilities); the dual simplex is used to
re-optimise after bound changes from a parent basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import NumericalFailure

BASIC, AT_LOWER, AT_UPPER, FREE, FIXED = 0, 1, 2, 3, 4

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50
DEGENERATE_LIMIT = 40
DUAL_STALL_LIMIT = 200


@dataclass
class Basis:
    """Simplex basis snapshot, reusable as a warm start for the same matrix."""

    heads: np.ndarray
    flags: np.ndarray


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray  # structural values, original units
    y: np.ndarray  # row duals, original units
    iterations: int
    basis: Basis | None
    farkas: np.ndarray | None = None
    ray: np.ndarray | None = None


def _segment_extrema(indptr, data, size):
    """Per-segment max and min of a compressed sparse array (empty -> 0, inf)."""
    vmax = np.zeros(size)
    vmin = np.full(size, np.inf)
    nonempty = np.flatnonzero(np.diff(indptr) > 0)
    if nonempty.size:
        starts = indptr[nonempty]
        vmax[nonempty] = np.maximum.reduceat(data, starts)
        vmin[nonempty] = np.minimum.reduceat(data, starts)
    return vmax, vmin


def _equilibrate(A: sp.csr_matrix, passes: int = 6):
    """Geometric-mean row/column scaling, then max-norm rows; powers of two only."""
    m, n = A.shape
    r = np.ones(m)
    c = np.ones(n)
    if A.nnz == 0:
        return r, c
    M = abs(A).tocsr().astype(float)
    M.sort_indices()
    Mc = M.tocsc()
    Mc.sort_indices()
    for _ in range(passes):
        S = M.multiply(r[:, None]).multiply(c[None, :]).tocsr()
        S.sort_indices()
        rmax, rmin = _segment_extrema(S.indptr, S.data, m)
        ok = rmax > 0
        r[ok] /= np.sqrt(rmax[ok] * rmin[ok])
        S = Mc.multiply(r[:, None]).multiply(c[None, :]).tocsc()
        S.sort_indices()
        cmax, cmin = _segment_extrema(S.indptr, S.data, n)
        ok = cmax > 0
        c[ok] /= np.sqrt(cmax[ok] * cmin[ok])
    S = M.multiply(r[:, None]).multiply(c[None, :]).tocsr()
    S.sort_indices()
    rmax, _ = _segment_extrema(S.indptr, S.data, m)
    r[rmax > 0] /= rmax[rmax > 0]
    r = np.exp2(np.round(np.log2(r)))
    c = np.exp2(np.round(np.log2(c)))
    return r, c


class SimplexLP:
    """Scaled LP data shared by every solve over the same matrix.

    Only the variable bounds may differ between solves, which is exactly
    what branch-and-bound needs.
    """

    def __init__(self, c, A, row_lo, row_hi, scale=True):
        A = sp.csr_matrix(A, dtype=float)
        self.m, self.n = A.shape
        if scale:
            self.rs, self.cs = _equilibrate(A)
        else:
            self.rs, self.cs = np.ones(self.m), np.ones(self.n)
        As = (sp.diags(self.rs) @ A @ sp.diags(self.cs)).tocsc()
        self.full = sp.hstack([As, -sp.identity(self.m, format="csc")], format="csc")
        self.full_T = self.full.T.tocsr()
        cs_ = np.asarray(c, dtype=float) * self.cs
        cmax = np.abs(cs_).max() if cs_.size else 0.0
        self.obj_scale = 1.0 / cmax if cmax > 0 else 1.0
        self.cost = np.concatenate([cs_ * self.obj_scale, np.zeros(self.m)])
        self.row_lo = np.asarray(row_lo, dtype=float) * self.rs
        self.row_hi = np.asarray(row_hi, dtype=float) * self.rs

    def scaled_bounds(self, lb, ub):
        lo = np.concatenate([np.asarray(lb, dtype=float) / self.cs, self.row_lo])
        hi = np.concatenate([np.asarray(ub, dtype=float) / self.cs, self.row_hi])
        return lo, hi

    def solve(self, lb, ub, warm: Basis | None = None, max_iter=None) -> SimplexResult:
        lo, hi = self.scaled_bounds(lb, ub)
        run = _Run(self, lo, hi, max_iter)
        if warm is not None and run.load_basis(warm) and run.dual_feasible():
            status = run.dual_simplex()
            if status == "switch":
                status = run.primal_simplex()
        else:
            if warm is None:
                run.slack_basis()
            status = run.primal_simplex()
        return run.result(status)


class _Run:
    def __init__(self, lp: SimplexLP, lo, hi, max_iter):
        self.lp = lp
        self.lo = lo
        self.hi = hi
        m, n = lp.m, lp.n
        self.N = n + m
        self.max_iter = max_iter if max_iter is not None else 50 * (n + m) + 1000
        self.iterations = 0
        self.x = np.zeros(self.N)
        self.flags = np.zeros(self.N, dtype=np.int8)
        self.heads = np.arange(n, n + m)
        self.lu = None
        self.etas: list[tuple[int, np.ndarray]] = []
        self.farkas = None
        self.ray = None

    # ---- basis handling ----------------------------------------------------------
    def _nonbasic_value(self, j):
        lo, hi = self.lo[j], self.hi[j]
        if lo == hi:
            self.flags[j] = FIXED
            return lo
        if np.isfinite(lo):
            self.flags[j] = AT_LOWER
            return lo
        if np.isfinite(hi):
            self.flags[j] = AT_UPPER
            return hi
        self.flags[j] = FREE
        return 0.0

    def slack_basis(self):
        n, m = self.lp.n, self.lp.m
        self.heads = np.arange(n, n + m)
        self.flags[:] = BASIC
        for j in range(n):
            self.x[j] = self._nonbasic_value(j)
        self.refactor()

    def load_basis(self, warm: Basis) -> bool:
        if warm.heads.shape != (self.lp.m,) or warm.flags.shape != (self.N,):
            self.slack_basis()
            return False
        self.heads = warm.heads.copy()
        self.flags = warm.flags.copy()
        for j in np.flatnonzero(self.flags != BASIC):
            f = self.flags[j]
            lo, hi = self.lo[j], self.hi[j]
            if lo == hi:
                self.flags[j] = FIXED
                self.x[j] = lo
            elif f == AT_UPPER and np.isfinite(hi):
                self.x[j] = hi
            elif f in (AT_LOWER, FIXED) and np.isfinite(lo):
                self.flags[j] = AT_LOWER
                self.x[j] = lo
            else:
                self.x[j] = self._nonbasic_value(j)
        try:
            self.refactor()
        except NumericalFailure:
            self.slack_basis()
            return False
        return True

    def refactor(self):
        B = self.lp.full[:, self.heads].tocsc()
        try:
            self.lu = splu(B, permc_spec="COLAMD", options={"SymmetricMode": False})
        except RuntimeError as exc:
            raise NumericalFailure(f"singular basis during refactorisation: {exc}") from exc
        self.etas = []
        nb = self.flags != BASIC
        rhs = -(self.lp.full[:, nb] @ self.x[nb])
        self.x[self.heads] = self.lu.solve(rhs)

    def ftran(self, v):
        w = self.lu.solve(v)
        for r, col in self.etas:
            wr = w[r] / col[r]
            w -= wr * col
            w[r] = wr
        return w

    def btran(self, v):
        w = np.array(v, dtype=float)
        for r, col in reversed(self.etas):
            w[r] = (w[r] - (col @ w - col[r] * w[r])) / col[r]
        return self.lu.solve(w, trans="T")

    def column(self, j):
        lp = self.lp
        start, end = lp.full.indptr[j], lp.full.indptr[j + 1]
        v = np.zeros(lp.m)
        v[lp.full.indices[start:end]] = lp.full.data[start:end]
        return v

    def pivot(self, r, q, alpha):
        leaving = self.heads[r]
        self.heads[r] = q
        self.flags[q] = BASIC
        self.etas.append((r, alpha))
        self.iterations += 1
        if len(self.etas) >= REFACTOR_EVERY:
            self.refactor()
        return leaving

    # ---- pricing -----------------------------------------------------------------
    def duals(self, cB):
        y = self.btran(cB)
        return y

    def reduced_costs(self, y, cost):
        return cost - self.lp.full_T @ y

    def infeasibility(self):
        xb = self.x[self.heads]
        lo = self.lo[self.heads]
        hi = self.hi[self.heads]
        below = lo - xb
        above = xb - hi
        return below, above

    def dual_feasible(self):
        y = self.duals(self.lp.cost[self.heads])
        d = self.reduced_costs(y, self.lp.cost)
        return self._dual_violation(d) <= DUAL_TOL

    def _dual_violation(self, d):
        f = self.flags
        v = np.zeros(self.N)
        v[f == AT_LOWER] = np.maximum(0.0, -d[f == AT_LOWER])
        v[f == AT_UPPER] = np.maximum(0.0, d[f == AT_UPPER])
        v[f == FREE] = np.abs(d[f == FREE])
        return v.max() if v.size else 0.0

    # ---- primal simplex ------------------------------------------------------------
    def primal_simplex(self):
        degenerate = 0
        cost = self.lp.cost
        zero_cost = np.zeros(self.N)
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex iteration limit {self.max_iter} reached")
            below, above = self.infeasibility()
            inf_below = below > PRIMAL_TOL
            inf_above = above > PRIMAL_TOL
            phase1 = bool(inf_below.any() or inf_above.any())
            if phase1:
                cB = np.where(inf_below, -1.0, np.where(inf_above, 1.0, 0.0))
                y = self.duals(cB)
                d = self.reduced_costs(y, zero_cost)
            else:
                y = self.duals(cost[self.heads])
                d = self.reduced_costs(y, cost)
            f = self.flags
            elig = np.zeros(self.N)
            lowm = f == AT_LOWER
            upm = f == AT_UPPER
            frm = f == FREE
            elig[lowm] = np.where(d[lowm] < -DUAL_TOL, -d[lowm], 0.0)
            elig[upm] = np.where(d[upm] > DUAL_TOL, d[upm], 0.0)
            elig[frm] = np.where(np.abs(d[frm]) > DUAL_TOL, np.abs(d[frm]), 0.0)
            cand = np.flatnonzero(elig > 0)
            if cand.size == 0:
                if phase1:
                    self.farkas = y
                    return "infeasible"
                return "optimal"
            if degenerate > DEGENERATE_LIMIT:
                q = int(cand[0])  # Bland
            else:
                q = int(cand[np.argmax(elig[cand])])
            sigma = 1.0 if d[q] < 0 else -1.0
            alpha = self.ftran(self.column(q))
            delta = -sigma * alpha
            t, r, target = self._primal_ratio(delta, phase1, bland=degenerate > DEGENERATE_LIMIT)
            flip = self.hi[q] - self.lo[q]
            if r < 0 and not np.isfinite(flip):
                if phase1:
                    raise NumericalFailure("phase 1 direction unbounded")
                ray = np.zeros(self.N)
                ray[q] = sigma
                ray[self.heads] = delta
                self.ray = ray
                return "unbounded"
            if r < 0 or flip <= t:
                step = flip
                self.x[q] += sigma * step
                self.x[self.heads] += step * delta
                self.flags[q] = AT_UPPER if sigma > 0 else AT_LOWER
                self.x[q] = self.hi[q] if sigma > 0 else self.lo[q]
                self.iterations += 1
                degenerate = 0 if step > 1e-12 else degenerate + 1
                continue
            degenerate = 0 if t > 1e-12 else degenerate + 1
            self.x[q] += sigma * t
            self.x[self.heads] += t * delta
            leaving = self.heads[r]
            self.x[leaving] = target
            self.flags[leaving] = AT_LOWER if target == self.lo[leaving] else AT_UPPER
            if self.lo[leaving] == self.hi[leaving]:
                self.flags[leaving] = FIXED
            self.pivot(r, q, alpha)

    def _primal_ratio(self, delta, phase1, bland=False):
        """Two-pass Harris ratio test. Returns (step, row, bound value) or row -1."""
        heads = self.heads
        xb = self.x[heads]
        lo = self.lo[heads]
        hi = self.hi[heads]
        big = np.abs(delta) > PIVOT_TOL
        below = xb < lo - PRIMAL_TOL
        above = xb > hi + PRIMAL_TOL
        feas = ~(below | above)
        inc = big & (delta > 0)
        dec = big & (delta < 0)
        tgt = np.full(delta.shape, np.nan)
        # feasible basics stay within their box
        m1 = feas & inc & np.isfinite(hi)
        tgt[m1] = hi[m1]
        m2 = feas & dec & np.isfinite(lo)
        tgt[m2] = lo[m2]
        if phase1:
            m3 = below & inc
            tgt[m3] = lo[m3]
            m4 = above & dec
            tgt[m4] = hi[m4]
        rows = np.flatnonzero(~np.isnan(tgt))
        if rows.size == 0:
            return np.inf, -1, 0.0
        dr = delta[rows]
        tr = tgt[rows]
        exact = np.maximum((tr - xb[rows]) / dr, 0.0)
        relaxed = (tr + np.sign(dr) * PRIMAL_TOL - xb[rows]) / dr
        tmax = relaxed.min()
        ok = exact <= tmax
        if bland:
            sel = rows[ok]
            pick = int(sel[np.argmin(heads[sel])])
        else:
            pick_local = np.flatnonzero(ok)
            pick = int(rows[pick_local[np.argmax(np.abs(dr[pick_local]))]])
        k = int(np.flatnonzero(rows == pick)[0])
        return float(exact[k]), pick, float(tr[k])

    # ---- dual simplex --------------------------------------------------------------
    def dual_simplex(self):
        cost = self.lp.cost
        best = -np.inf
        stalled = 0
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex iteration limit {self.max_iter} reached")
            # no anti-cycling rule here; hand a stalled run to the primal pass
            obj = float(cost @ self.x)
            if obj > best + 1e-12 * (1.0 + abs(obj)):
                best, stalled = obj, 0
            else:
                stalled += 1
                if stalled > DUAL_STALL_LIMIT:
                    return "switch"
            below, above = self.infeasibility()
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if viol.size else 0
            if viol.size == 0 or viol[r] <= PRIMAL_TOL:
                return "switch"  # primal feasible: let the primal pass confirm optimality
            leaving = self.heads[r]
            increase = below[r] > 0
            target = self.lo[leaving] if increase else self.hi[leaving]
            y = self.duals(cost[self.heads])
            d = self.reduced_costs(y, cost)
            er = np.zeros(self.lp.m)
            er[r] = 1.0
            rho = self.btran(er)
            arow = self.lp.full_T @ rho
            f = self.flags
            # entering j moves with sign s_j; x_r changes by -s_j * t * arow_j
            want = 1.0 if increase else -1.0
            s = np.zeros(self.N)
            lowm = (f == AT_LOWER) & (want * arow < -PIVOT_TOL)
            upm = (f == AT_UPPER) & (want * arow > PIVOT_TOL)
            frm = (f == FREE) & (np.abs(arow) > PIVOT_TOL)
            s[lowm] = 1.0
            s[upm] = -1.0
            s[frm] = -want * np.sign(arow[frm])
            cand = np.flatnonzero(s != 0)
            if cand.size == 0:
                self.farkas = rho
                return "infeasible"
            a = np.abs(arow[cand])
            dj = np.abs(d[cand])
            tmax = ((dj + DUAL_TOL) / a).min()
            exact = dj / a
            ok = np.flatnonzero(exact <= tmax)
            k = ok[np.argmax(a[ok])]
            q = int(cand[k])
            sigma = s[q]
            alpha = self.ftran(self.column(q))
            if abs(alpha[r]) < PIVOT_TOL:
                return "switch"
            t = abs(self.x[leaving] - target) / abs(alpha[r])
            self.x[q] += sigma * t
            self.x[self.heads] += -sigma * t * alpha
            self.x[leaving] = target
            self.flags[leaving] = AT_LOWER if increase else AT_UPPER
            if self.lo[leaving] == self.hi[leaving]:
                self.flags[leaving] = FIXED
            self.pivot(r, q, alpha)

    # ---- results -------------------------------------------------------------------
    def result(self, status) -> SimplexResult:
        lp = self.lp
        n = lp.n
        if status == "optimal":
            # fresh factorisation removes drift accumulated in the eta file
            self.refactor()
            below, above = self.infeasibility()
            if max(below.max(initial=0), above.max(initial=0)) > PRIMAL_TOL:
                status = self.primal_simplex()
                if status == "optimal":
                    self.refactor()
        x = self.x[:n] * lp.cs
        y = np.zeros(lp.m)
        if status == "optimal":
            ys = self.duals(lp.cost[self.heads])
            y = ys * lp.rs / lp.obj_scale
        farkas = None
        if self.farkas is not None:
            farkas = self.farkas * lp.rs
        ray = None
        if self.ray is not None:
            ray = self.ray[:n] * lp.cs
        return SimplexResult(
            status=status, x=x, y=y, iterations=self.iterations,
            basis=Basis(self.heads.copy(), self.flags.copy()), farkas=farkas, ray=ray,
        )
