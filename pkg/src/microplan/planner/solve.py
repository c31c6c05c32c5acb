"""Two-stage planning driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, InputError, SolverLimitError
from ..grid_model.validate import validate
from ..milp import MILP_INFEASIBLE, MilpOptions, solve_milp
from .costs import cost_breakdown
from .formulation import DEFAULT_CELL_BUDGET, build_milp
from .solution import PlanSolution, StageInfo, extract_plan

log = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    gap_tol: float = 1e-6
    node_limit: int = 100_000
    time_limit: float | None = None  # seconds, per stage
    backend: str = "auto"
    iterate: bool = False  # repeat stage two until voltages settle
    max_rounds: int = 10
    fixed_point_tol: float = 1e-4
    cell_budget: int = DEFAULT_CELL_BUDGET
    record_nodes: bool = False

    def milp_options(self) -> MilpOptions:
        return MilpOptions(gap_tol=self.gap_tol, node_limit=self.node_limit, time_limit=self.time_limit,
                           backend=self.backend, record_nodes=self.record_nodes)


def _precheck(problem):
    issues = validate(problem)
    blocking = [v for v in issues if v.code == "critical_capacity"]
    others = [v for v in issues if v.code != "critical_capacity"]
    if others:
        raise InputError("invalid planning problem: " + "; ".join(str(v) for v in others))
    if blocking:
        raise InfeasibleError(str(blocking[0]), precheck=blocking[0].code)


def solve_stage(problem, stage: int = 1, dv_hat=None, options: SolveOptions | None = None,
                check: bool = True) -> PlanSolution:
    """Build, solve and extract one stage; costs are recomputed and checked."""
    opts = options or SolveOptions()
    model, index = build_milp(problem, stage, dv_hat, cell_budget=opts.cell_budget)
    log.info("stage %d: %d columns, %d rows, %d binaries", stage, model.num_vars, model.num_rows,
             len(model.binary_indices))
    sol = solve_milp(model, opts.milp_options())
    if sol.status == MILP_INFEASIBLE:
        raise InfeasibleError(f"stage {stage} model is infeasible")
    if sol.incumbent is None:
        raise SolverLimitError(f"stage {stage} stopped at {sol.status} without a feasible plan", sol.status)
    plan = extract_plan(sol, index, problem, verify=check)
    plan.costs = cost_breakdown(plan, problem, check=check)
    plan.node_log = sol.node_log if opts.record_nodes else []
    return plan


def solve_two_stage(problem, options: SolveOptions | None = None) -> PlanSolution:
    """Plan with a linear flow model, then re-plan with voltage-corrected flows.

    Stage one linearises flows around flat voltage. Stage two scales the
    voltage terms of each line by ``1 + dV`` of its sending bus taken from
    stage one. With ``options.iterate`` stage two is repeated, feeding back
    its own voltages, until they move less than ``fixed_point_tol``.
    The returned plan is the final stage-two plan; ``stage_info`` keeps
    the stage-one plan and objectives.

    Raises
    ------
    InputError
        The problem fails validation.
    InfeasibleError
        A precheck or a stage model is infeasible.
    SolverLimitError
        A limit was hit before any feasible plan was found.
    """
    opts = options or SolveOptions()
    _precheck(problem)
    first = solve_stage(problem, 1, None, opts)
    plan = solve_stage(problem, 2, first.flows.dv, opts)
    change = float(np.abs(plan.flows.dv - first.flows.dv).max(initial=0.0))
    rounds = 1
    while opts.iterate and change > opts.fixed_point_tol and rounds < opts.max_rounds:
        nxt = solve_stage(problem, 2, plan.flows.dv, opts)
        change = float(np.abs(nxt.flows.dv - plan.flows.dv).max(initial=0.0))
        plan = nxt
        rounds += 1
    plan.stage_info = StageInfo(stage1_objective=first.objective, stage2_objective=plan.objective,
                                max_dv_change=change, rounds=rounds, stage1_plan=first)
    return plan
