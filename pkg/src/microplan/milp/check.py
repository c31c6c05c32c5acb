"""Residual reports for candidate points of a :class:`MilpModel`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import MilpModel


@dataclass(frozen=True)
class ResidualReport:
    bounds: float
    rows: float
    integrality: float
    tol: float
    worst_row: int = -1

    @property
    def ok(self) -> bool:
        return max(self.bounds, self.rows, self.integrality) <= self.tol

    def __bool__(self):
        return self.ok


def check_solution(model: MilpModel, point, tol: float = 1e-6) -> ResidualReport:
    """Absolute max violation per class: variable bounds, rows, integrality."""
    x = np.asarray(point, dtype=float)
    if x.shape != (model.num_vars,):
        raise ValueError(f"point has {x.size} entries, model has {model.num_vars} columns")
    with np.errstate(invalid="ignore"):
        bnd = np.maximum(model.lb - x, x - model.ub)
        bounds = float(np.max(np.maximum(bnd, 0.0), initial=0.0))
        ax = model.A @ x
        rv = np.maximum(model.row_lo - ax, ax - model.row_hi)
        rv = np.maximum(np.nan_to_num(rv, nan=0.0), 0.0)
    rows = float(rv.max(initial=0.0))
    worst = int(np.argmax(rv)) if rv.size and rows > 0 else -1
    b = x[model.binary]
    integrality = float(np.max(np.abs(b - np.round(b)), initial=0.0))
    return ResidualReport(bounds, rows, integrality, tol, worst)
