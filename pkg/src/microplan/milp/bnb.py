"""Best-first branch-and-bound over binary columns."""

from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LpEngine, LpSolution
from .model import MilpModel

log = logging.getLogger(__name__)

INT_TOL = 1e-6

MILP_OPTIMAL = "Optimal"
MILP_INFEASIBLE = "Infeasible"
MILP_GAP_LIMIT = "GapLimit"
MILP_NODE_LIMIT = "NodeLimit"


@dataclass
class MilpOptions:
    gap_tol: float = 1e-6
    node_limit: int = 100_000
    time_limit: float | None = None
    backend: str = "auto"
    heuristics: bool = True
    record_nodes: bool = False

    def __post_init__(self):
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if self.node_limit < 1:
            raise ValueError("node_limit must be at least 1")


@dataclass
class NodeRecord:
    node_id: int
    depth: int
    status: str
    objective: float
    residuals: object
    certified: bool


@dataclass
class MilpSolution:
    status: str
    incumbent: np.ndarray | None
    objective_value: float
    best_bound: float
    gap: float
    nodes_explored: int
    lp_iterations: int = 0
    bound_history: list[float] = field(default_factory=list, repr=False)
    node_log: list[NodeRecord] = field(default_factory=list, repr=False)
    root_bound: float = math.nan


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


def _most_fractional(x, binaries):
    vals = x[binaries]
    frac = np.abs(vals - np.round(vals))
    k = int(np.argmax(frac))  # first maximum -> lowest column index on ties
    if frac[k] <= INT_TOL:
        return -1
    return int(binaries[k])


@dataclass(order=True)
class _Node:
    bound: float
    node_id: int
    depth: int = field(compare=False)
    lb: np.ndarray = field(compare=False, repr=False)
    ub: np.ndarray = field(compare=False, repr=False)
    lp: LpSolution = field(compare=False, repr=False)


def solve_milp(model: MilpModel, options: MilpOptions | None = None, **kwargs) -> MilpSolution:
    """Minimise ``model`` with binaries enforced.

    Nodes are processed in order of their LP bound (ties by creation
    order). The branching column is the most fractional binary, lowest
    index first on ties; the down child (``x = 0``) is created before the
    up child. Child LPs warm-start from the parent basis when the in-house
    simplex is in use.
    """
    opts = options or MilpOptions(**kwargs)
    start = time.perf_counter()
    engine = LpEngine(model, opts.backend)
    binaries = model.binary_indices
    record = opts.record_nodes
    node_log: list[NodeRecord] = []
    iterations = 0
    node_counter = 0

    def run_lp(lb, ub, warm, depth):
        nonlocal iterations, node_counter
        sol = engine.solve(lb, ub, warm=warm)
        iterations += sol.iterations
        node_id = node_counter
        node_counter += 1
        if record:
            node_log.append(NodeRecord(node_id, depth, sol.status, sol.objective_value,
                                       sol.residuals, sol.certified if sol.status == OPTIMAL else True))
        return node_id, sol

    lb0 = np.array(model.lb, dtype=float)
    ub0 = np.array(model.ub, dtype=float)
    root_id, root = run_lp(lb0, ub0, None, 0)
    if root.status == UNBOUNDED:
        raise ValueError("LP relaxation is unbounded; the planning model must bound every column")
    if root.status == INFEASIBLE:
        return MilpSolution(MILP_INFEASIBLE, None, math.inf, math.inf, math.inf, 1, iterations,
                            node_log=node_log)

    inc_x: np.ndarray | None = None
    inc_obj = math.inf
    bound_history = []
    pruned_bound = math.inf

    def offer(sol: LpSolution):
        nonlocal inc_x, inc_obj
        if sol.objective_value < inc_obj:
            x = sol.primal.copy()
            x[binaries] = np.round(x[binaries])
            inc_x, inc_obj = x, sol.objective_value

    def cutoff():
        if not math.isfinite(inc_obj):
            return math.inf
        return inc_obj - opts.gap_tol * max(1.0, abs(inc_obj))

    heap: list[_Node] = []
    if _most_fractional(root.primal, binaries) < 0:
        offer(root)
    else:
        heapq.heappush(heap, _Node(root.objective_value, root_id, 0, lb0, ub0, root))
        if opts.heuristics:
            for sol in _rounding_heuristics(engine, root, binaries, lb0, ub0):
                iterations += sol.iterations
                offer(sol)
    root_bound = root.objective_value
    status = None

    while heap:
        best = heap[0].bound
        bound_history.append(min(best, pruned_bound, inc_obj))
        if node_counter >= opts.node_limit:
            status = MILP_NODE_LIMIT
            break
        if opts.time_limit is not None and time.perf_counter() - start > opts.time_limit:
            status = MILP_GAP_LIMIT
            break
        node = heapq.heappop(heap)
        if node.bound >= cutoff():
            # best-first: every remaining node is at least as bad
            pruned_bound = min(pruned_bound, node.bound)
            for rest in heap:
                pruned_bound = min(pruned_bound, rest.bound)
            heap.clear()
            break
        j = _most_fractional(node.lp.primal, binaries)
        for value in (0.0, 1.0):
            lb = node.lb.copy()
            ub = node.ub.copy()
            lb[j] = ub[j] = value
            _, child = run_lp(lb, ub, node.lp.basis, node.depth + 1)
            if child.status != OPTIMAL:
                continue
            child_bound = max(child.objective_value, node.bound)
            if child_bound >= cutoff():
                pruned_bound = min(pruned_bound, child_bound)
                continue
            if _most_fractional(child.primal, binaries) < 0:
                offer(child)
                continue
            heapq.heappush(heap, _Node(child_bound, node_counter - 1, node.depth + 1, lb, ub, child))

    open_bound = min((n.bound for n in heap), default=math.inf)
    best_bound = min(open_bound, pruned_bound, inc_obj)
    gap = relative_gap(inc_obj, best_bound)
    if status is None:
        status = MILP_OPTIMAL if inc_x is not None else MILP_INFEASIBLE
    elif inc_x is not None and gap <= opts.gap_tol:
        status = MILP_OPTIMAL
    bound_history.append(best_bound)
    log.debug("branch-and-bound: %s after %d nodes, obj %.6g bound %.6g", status, node_counter, inc_obj,
              best_bound)
    return MilpSolution(
        status=status, incumbent=inc_x, objective_value=inc_obj, best_bound=best_bound, gap=gap,
        nodes_explored=node_counter, lp_iterations=iterations, bound_history=bound_history,
        node_log=node_log, root_bound=root_bound,
    )


def _rounding_heuristics(engine: LpEngine, root: LpSolution, binaries, lb0, ub0):
    """Fix every binary by rounding the root relaxation (up, then nearest) and re-solve."""
    x = root.primal[binaries]
    tried = set()
    for rounded in (np.ceil(x - INT_TOL), np.round(x)):
        key = tuple(rounded.astype(int))
        if key in tried:
            continue
        tried.add(key)
        lb = lb0.copy()
        ub = ub0.copy()
        lb[binaries] = np.maximum(lb0[binaries], rounded)
        ub[binaries] = np.minimum(ub0[binaries], rounded)
        sol = engine.solve(lb, ub, warm=root.basis)
        if sol.status == OPTIMAL:
            yield sol
