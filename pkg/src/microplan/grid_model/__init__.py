"""Planning-case data model, case files and built-in cases."""

from .cases import builtin_case33, random_toy, toy4
from .io import dumps_problem, load_problem, loads_problem, save_problem
from .types import (Bus, DerCandidate, DerKind, Economics, Line, LineStatus, Period, PlanningProblem, Scenario,
                    ScenarioSet, TimeSeriesBundle, per_unitize, present_worth)
from .validate import Violation, validate

__all__ = [
    "Bus", "Line", "LineStatus", "DerCandidate", "DerKind", "Period", "TimeSeriesBundle", "Scenario",
    "ScenarioSet", "Economics", "PlanningProblem", "per_unitize", "present_worth",
    "load_problem", "loads_problem", "dumps_problem", "save_problem",
    "validate", "Violation", "builtin_case33", "toy4", "random_toy",
]
