"""Sparse mixed-binary linear programming: simplex LP solves and branch-and-bound."""

from .bnb import (MILP_GAP_LIMIT, MILP_INFEASIBLE, MILP_NODE_LIMIT, MILP_OPTIMAL, MilpOptions,
                  MilpSolution, relative_gap, solve_milp)
from .check import ResidualReport, check_solution
from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpEngine, LpSolution, Residuals, certify, solve_lp
from .model import MilpModel, ModelBuilder, from_dense, write_lp

__all__ = [
    "MilpModel", "ModelBuilder", "from_dense", "write_lp",
    "LpEngine", "LpSolution", "Residuals", "certify", "solve_lp",
    "OPTIMAL", "INFEASIBLE", "UNBOUNDED",
    "MilpOptions", "MilpSolution", "solve_milp", "relative_gap",
    "MILP_OPTIMAL", "MILP_INFEASIBLE", "MILP_GAP_LIMIT", "MILP_NODE_LIMIT",
    "ResidualReport", "check_solution",
]
