"""Joint DER siting/sizing and line planning as a two-stage MILP."""

from ..grid_model.types import present_worth
from .costs import CostBreakdown, YearCost, cost_breakdown
from .formulation import THETA_MAX, VariableIndex, build_milp
from .report import plan_to_dict, write_dispatch_csv, write_plan_json
from .solution import (Dispatch, FlowState, InstalledDer, PlanCheck, PlanSolution, StageInfo, check_plan,
                       extract_plan)
from .solve import SolveOptions, solve_stage, solve_two_stage

__all__ = [
    "build_milp", "VariableIndex", "THETA_MAX", "present_worth",
    "extract_plan", "check_plan", "PlanCheck", "PlanSolution", "InstalledDer", "Dispatch", "FlowState",
    "StageInfo", "cost_breakdown", "CostBreakdown", "YearCost",
    "SolveOptions", "solve_stage", "solve_two_stage",
    "plan_to_dict", "write_plan_json", "write_dispatch_csv",
]
