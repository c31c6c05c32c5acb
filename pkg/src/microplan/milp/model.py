"""Sparse mixed-binary linear program container and incremental builder."""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

INF = np.inf

_RELATIONS = ("<=", "=", ">=")


@dataclass(frozen=True, eq=False)
class MilpModel:
    """Minimisation model ``min c.x  s.t.  row_lo <= A x <= row_hi, lb <= x <= ub``.

    Rows are stored in ranged form; :meth:`constraints` gives the
    ``(row, relation, rhs)`` view. ``binary`` marks the integral columns,
    every other column is continuous.
    """

    objective: np.ndarray
    A: sp.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    binary: np.ndarray
    names: tuple[str, ...] | None = None
    row_names: tuple[str, ...] | None = None
    obj_offset: float = 0.0

    def __post_init__(self):
        n = self.objective.shape[0]
        m = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError(f"matrix has {self.A.shape[1]} columns, objective has {n}")
        for arr, size, label in ((self.lb, n, "lb"), (self.ub, n, "ub"), (self.binary, n, "binary"),
                                 (self.row_lo, m, "row_lo"), (self.row_hi, m, "row_hi")):
            if arr.shape != (size,):
                raise ValueError(f"{label} has shape {arr.shape}, expected ({size},)")
        if not np.all(np.isfinite(self.objective)):
            raise ValueError("objective contains NaN or infinite coefficients")
        if not np.all(np.isfinite(self.A.data)):
            raise ValueError("constraint matrix contains NaN or infinite coefficients")
        if np.any(np.isnan(self.lb)) or np.any(np.isnan(self.ub)):
            raise ValueError("NaN variable bound")
        if np.any(self.lb > self.ub):
            j = int(np.flatnonzero(self.lb > self.ub)[0])
            raise ValueError(f"variable {self.var_name(j)} has lb > ub")
        b = self.binary
        if np.any(self.lb[b] < 0) or np.any(self.ub[b] > 1):
            raise ValueError("binary variables must have bounds within [0, 1]")
        if np.any(self.row_lo > self.row_hi):
            raise ValueError("row with lower side above upper side")
        for arr in (self.objective, self.row_lo, self.row_hi, self.lb, self.ub, self.binary):
            arr.setflags(write=False)

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def binary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.binary)

    def var_name(self, j: int) -> str:
        return self.names[j] if self.names else f"x{j}"

    def row_name(self, i: int) -> str:
        return self.row_names[i] if self.row_names else f"r{i}"

    def constraints(self):
        """Yield ``(cols, coefs, relation, rhs)``; a ranged row yields two entries."""
        A = self.A
        for i in range(A.shape[0]):
            lo, hi = self.row_lo[i], self.row_hi[i]
            cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
            vals = A.data[A.indptr[i]:A.indptr[i + 1]]
            if lo == hi:
                yield cols, vals, "=", float(lo)
                continue
            if np.isfinite(lo):
                yield cols, vals, ">=", float(lo)
            if np.isfinite(hi):
                yield cols, vals, "<=", float(hi)

    def with_bounds(self, lb=None, ub=None) -> "MilpModel":
        """Copy with replaced variable bounds; the matrix is shared."""
        return MilpModel(
            objective=self.objective, A=self.A, row_lo=self.row_lo, row_hi=self.row_hi,
            lb=np.array(self.lb if lb is None else lb, dtype=float),
            ub=np.array(self.ub if ub is None else ub, dtype=float),
            binary=self.binary, names=self.names, row_names=self.row_names,
            obj_offset=self.obj_offset,
        )

    def relaxed(self) -> "MilpModel":
        return MilpModel(
            objective=self.objective, A=self.A, row_lo=self.row_lo, row_hi=self.row_hi,
            lb=self.lb, ub=self.ub, binary=np.zeros(self.num_vars, dtype=bool),
            names=self.names, row_names=self.row_names, obj_offset=self.obj_offset,
        )

    def evaluate(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float)) + self.obj_offset


class ModelBuilder:
    """Accumulates columns and rows, then freezes them into a :class:`MilpModel`.

    >>> mb = ModelBuilder()
    >>> x = mb.add_var(0, 3, cost=-1.0, name="x")
    >>> mb.add_row([x], [1.0], "<=", 2.0)
    0
    >>> mb.build().num_vars
    1
    """

    def __init__(self):
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._cost: list[float] = []
        self._binary: list[bool] = []
        self._names: list[str] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._row_lo: list[float] = []
        self._row_hi: list[float] = []
        self._row_names: list[str] = []
        self.obj_offset = 0.0

    @property
    def num_vars(self) -> int:
        return len(self._lb)

    @property
    def num_rows(self) -> int:
        return len(self._row_lo)

    def add_var(self, lb=0.0, ub=INF, cost=0.0, binary=False, name=None) -> int:
        j = len(self._lb)
        if binary:
            lb, ub = max(0.0, lb), min(1.0, ub)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._cost.append(float(cost))
        self._binary.append(bool(binary))
        self._names.append(name if name is not None else f"x{j}")
        return j

    def add_vars(self, shape, lb=0.0, ub=INF, cost=0.0, name=None) -> np.ndarray:
        """Add a block of continuous columns; returns their indices in ``shape``."""
        count = int(np.prod(shape))
        start = len(self._lb)
        lbs = np.broadcast_to(np.asarray(lb, dtype=float), shape).ravel()
        ubs = np.broadcast_to(np.asarray(ub, dtype=float), shape).ravel()
        costs = np.broadcast_to(np.asarray(cost, dtype=float), shape).ravel()
        self._lb.extend(lbs.tolist())
        self._ub.extend(ubs.tolist())
        self._cost.extend(costs.tolist())
        self._binary.extend([False] * count)
        if name is None:
            self._names.extend(f"x{start + k}" for k in range(count))
        else:
            for idx in np.ndindex(*shape) if shape else [()]:
                self._names.append(name + "".join(f"_{i}" for i in idx))
        return np.arange(start, start + count).reshape(shape)

    def set_cost(self, j, cost):
        self._cost[int(j)] = float(cost)

    def add_cost(self, j, cost):
        self._cost[int(j)] += float(cost)

    def set_bounds(self, j, lb=None, ub=None):
        if lb is not None:
            self._lb[int(j)] = float(lb)
        if ub is not None:
            self._ub[int(j)] = float(ub)

    def add_row(self, cols, coefs, relation, rhs, name=None) -> int:
        if relation not in _RELATIONS:
            raise ValueError(f"unknown relation {relation!r}")
        rhs = float(rhs)
        lo = rhs if relation in ("=", ">=") else -INF
        hi = rhs if relation in ("=", "<=") else INF
        return self.add_range(cols, coefs, lo, hi, name)

    def add_range(self, cols, coefs, lo, hi, name=None) -> int:
        i = len(self._row_lo)
        cols = [int(c) for c in cols]
        coefs = [float(v) for v in coefs]
        if len(cols) != len(coefs):
            raise ValueError("cols and coefs differ in length")
        n = len(self._lb)
        for c in cols:
            if c < 0 or c >= n:
                raise IndexError(f"row {i} references column {c}, model has {n}")
        self._rows.extend([i] * len(cols))
        self._cols.extend(cols)
        self._vals.extend(coefs)
        self._row_lo.append(float(lo))
        self._row_hi.append(float(hi))
        self._row_names.append(name if name is not None else f"r{i}")
        return i

    def build(self) -> MilpModel:
        n, m = len(self._lb), len(self._row_lo)
        A = sp.csr_matrix((np.array(self._vals, dtype=float), (np.array(self._rows, dtype=np.int64),
                           np.array(self._cols, dtype=np.int64))), shape=(m, n))
        A.sum_duplicates()
        A.eliminate_zeros()
        return MilpModel(
            objective=np.array(self._cost, dtype=float),
            A=A,
            row_lo=np.array(self._row_lo, dtype=float),
            row_hi=np.array(self._row_hi, dtype=float),
            lb=np.array(self._lb, dtype=float),
            ub=np.array(self._ub, dtype=float),
            binary=np.array(self._binary, dtype=bool),
            names=tuple(self._names),
            row_names=tuple(self._row_names),
            obj_offset=self.obj_offset,
        )


def from_dense(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0.0, INF), binary=None) -> MilpModel:
    """Build a model from ``linprog``-style dense arrays (used by tests and examples)."""
    c = np.asarray(c, dtype=float)
    n = c.size
    blocks, lo, hi = [], [], []
    if A_ub is not None:
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        blocks.append(A_ub)
        lo.append(np.full(A_ub.shape[0], -INF))
        hi.append(np.asarray(b_ub, dtype=float))
    if A_eq is not None:
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        blocks.append(A_eq)
        lo.append(np.asarray(b_eq, dtype=float))
        hi.append(np.asarray(b_eq, dtype=float))
    A = sp.csr_matrix(np.vstack(blocks)) if blocks else sp.csr_matrix((0, n))
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim == 1:
        bounds = np.tile(bounds, (n, 1))
    lb = np.where(np.isnan(bounds[:, 0]), -INF, bounds[:, 0])
    ub = np.where(np.isnan(bounds[:, 1]), INF, bounds[:, 1])
    binary = np.zeros(n, dtype=bool) if binary is None else np.asarray(binary, dtype=bool)
    return MilpModel(
        objective=c, A=A,
        row_lo=np.concatenate(lo) if lo else np.zeros(0),
        row_hi=np.concatenate(hi) if hi else np.zeros(0),
        lb=lb.astype(float), ub=ub.astype(float), binary=binary,
    )


_LP_NAME = re.compile(r"[^A-Za-z0-9_.\[\]]")


def _lp_name(raw: str) -> str:
    name = _LP_NAME.sub("_", raw)
    if not name or name[0].isdigit() or name[0] in ".eE":
        name = "v" + name
    return name


def _fmt(v: float) -> str:
    return repr(float(v))


def _terms(cols, vals, names) -> str:
    out = []
    for k, (c, v) in enumerate(zip(cols, vals)):
        sign = "-" if v < 0 else "+"
        if k == 0 and sign == "+":
            out.append(f"{_fmt(abs(v))} {names[c]}")
        else:
            out.append(f"{sign} {_fmt(abs(v))} {names[c]}")
    return " ".join(out) if out else "0 " + names[0]


def write_lp(model: MilpModel, path) -> Path:
    """Write the model in CPLEX LP text format for cross-checking elsewhere."""
    names = [_lp_name(model.var_name(j)) for j in range(model.num_vars)]
    lines = ["\\ exported by microplan", "Minimize"]
    nz = np.flatnonzero(model.objective)
    lines.append(" obj: " + _terms(nz, model.objective[nz], names))
    lines.append("Subject To")
    for k, (cols, vals, rel, rhs) in enumerate(model.constraints()):
        lines.append(f" c{k}: {_terms(cols, vals, names)} {rel} {_fmt(rhs)}")
    lines.append("Bounds")
    for j in range(model.num_vars):
        lo, hi = model.lb[j], model.ub[j]
        if model.binary[j] and lo == 0 and hi == 1:
            continue
        if lo == hi:
            lines.append(f" {names[j]} = {_fmt(lo)}")
        elif np.isinf(lo) and np.isinf(hi):
            lines.append(f" {names[j]} free")
        else:
            lo_s = "-inf" if np.isinf(lo) else _fmt(lo)
            hi_s = "+inf" if np.isinf(hi) else _fmt(hi)
            lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    bins = model.binary_indices
    if bins.size:
        lines.append("Binaries")
        lines.extend(" " + names[j] for j in bins)
    lines.append("End")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
