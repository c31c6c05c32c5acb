"""Planning results: installed assets, dispatch, flows, and their self-checks."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IntegralityError, MismatchError
from ..grid_model.types import DerKind, PlanningProblem

BINARY_TOL = 1e-6
CAPACITY_TOL = 1e-7  # MW below which a sited DER counts as not built


@dataclass(frozen=True)
class InstalledDer:
    id: int
    kind: DerKind
    bus: int
    p_max: float  # MW
    c_max: float = 0.0  # MWh, storage only
    name: str = ""


@dataclass
class Dispatch:
    """Operating point in MW/MVAr, arrays indexed ``[scenario, period, member]``."""

    p: np.ndarray  # generators
    q: np.ndarray
    p_ch: np.ndarray  # storage
    p_dch: np.ndarray
    p_m: np.ndarray  # [scenario, period]
    q_m: np.ndarray
    ls: np.ndarray  # [scenario, period, bus]


@dataclass
class FlowState:
    """Per-unit voltage/angle deviations and line flows for every scenario and period.

    ``gain`` is the factor multiplying the conductance/susceptance voltage
    terms of each line's flow equation (all ones in stage one).
    """

    dv: np.ndarray  # [scenario, period, bus]
    dtheta: np.ndarray
    pl: np.ndarray  # [scenario, period, line]
    ql: np.ndarray
    gain: np.ndarray

    def period(self, s: int, t: int) -> dict:
        return {"dv": self.dv[s, t], "dtheta": self.dtheta[s, t], "pl": self.pl[s, t], "ql": self.ql[s, t]}


@dataclass
class StageInfo:
    stage1_objective: float
    stage2_objective: float
    max_dv_change: float
    rounds: int = 1
    stage1_plan: "PlanSolution | None" = field(default=None, repr=False)


@dataclass
class PlanSolution:
    status: str
    stage: int
    objective: float  # $, as reported by the solver
    installed_ders: tuple
    installed_lines: tuple
    dispatch: Dispatch = field(repr=False)
    flows: FlowState = field(repr=False)
    best_bound: float = float("nan")
    gap: float = 0.0
    nodes: int = 0
    costs: object = None
    stage_info: StageInfo | None = None
    incumbent: np.ndarray | None = field(default=None, repr=False)
    node_log: list = field(default_factory=list, repr=False)

    def der(self, der_id):
        for d in self.installed_ders:
            if d.id == der_id:
                return d
        return None

    @property
    def dispatchable_capacity(self) -> float:
        return sum(d.p_max for d in self.installed_ders if d.kind is DerKind.DISPATCHABLE)

    @property
    def total_der_capacity(self) -> float:
        return sum(d.p_max for d in self.installed_ders)


def _round_binary(v, what):
    if abs(v - 1.0) <= BINARY_TOL:
        return 1
    if abs(v) <= BINARY_TOL:
        return 0
    raise IntegralityError(f"{what} = {v:.9g} is not integral")


def extract_plan(milp_solution, index, problem: PlanningProblem, verify: bool = True) -> PlanSolution:
    """Turn a MILP incumbent into a :class:`PlanSolution` in engineering units.

    Binaries are rounded within ``1e-6``; anything further off raises
    :class:`IntegralityError`. A DER sited with (numerically) zero
    capacity is reported as not built. With ``verify`` the plan is
    re-checked with :func:`check_plan` and a failure raises
    :class:`MismatchError`.
    """
    x = milp_solution.incumbent
    if x is None:
        raise IntegralityError(f"no incumbent to extract (status {milp_solution.status})")
    x = np.asarray(x, dtype=float)
    base = problem.base_mva

    sited = {}
    for (did, bus), col in index.x.items():
        if _round_binary(x[col], f"x[{did},{bus}]"):
            if did in sited:
                raise IntegralityError(f"DER {did} sited at more than one bus")
            sited[did] = bus
    lines_on = []
    for lid, col in index.z.items():
        if _round_binary(x[col], f"z[{lid}]"):
            lines_on.append(lid)

    installed = []
    for d in problem.der_candidates:
        pmax = max(0.0, x[index.p_max[d.id]] * base)
        cmax = max(0.0, x[index.c_max[d.id]] * base) if d.id in index.c_max else 0.0
        if d.id in sited and max(pmax, cmax) > CAPACITY_TOL:
            installed.append(InstalledDer(d.id, d.kind, sited[d.id], pmax, cmax, d.name))

    def take(cols, scale=1.0):
        cols = np.asarray(cols, dtype=np.int64)
        return x[cols] * scale if cols.size else np.zeros(cols.shape)

    dispatch = Dispatch(p=take(index.p, base), q=take(index.q, base), p_ch=take(index.p_ch, base),
                        p_dch=take(index.p_dch, base), p_m=take(index.p_m, base), q_m=take(index.q_m, base),
                        ls=take(index.ls, base))
    gain = getattr(index, "gain", None)
    if gain is None:
        gain = np.ones(np.asarray(index.pl).shape)
    flows = FlowState(dv=take(index.dv), dtheta=take(index.dtheta), pl=take(index.pl), ql=take(index.ql),
                      gain=gain)
    plan = PlanSolution(status=milp_solution.status, stage=index.stage, objective=milp_solution.objective_value,
                        installed_ders=tuple(installed), installed_lines=tuple(sorted(lines_on)),
                        dispatch=dispatch, flows=flows, best_bound=milp_solution.best_bound,
                        gap=milp_solution.gap, nodes=milp_solution.nodes_explored, incumbent=x)
    if verify:
        report = check_plan(plan, problem)
        if not report.ok:
            raise MismatchError("extracted plan violates invariants: " + "; ".join(report.failures))
    return plan


@dataclass
class PlanCheck:
    residuals: dict
    failures: list
    tol: float

    @property
    def ok(self) -> bool:
        return not self.failures


def check_plan(plan: PlanSolution, problem: PlanningProblem, tol: float = 1e-6) -> PlanCheck:
    """Recompute the physical invariants of a plan from its own fields.

    Residuals are in per-unit (energies in per-unit hours). The check is
    independent of the MILP rows: it rebuilds bus balances, flow
    equations, storage windows and gating from the reported quantities.
    """
    base = problem.base_mva
    ts = problem.timeseries
    scen = problem.scenarios.scenarios
    pos = problem.bus_position
    lines = problem.lines
    S, T, B = len(scen), ts.num_periods, len(problem.buses)
    disp, fl = plan.dispatch, plan.flows
    gens = [d for d in problem.der_candidates if d.kind is not DerKind.STORAGE]
    stores = [d for d in problem.der_candidates if d.kind is DerKind.STORAGE]
    built = {d.id: d for d in plan.installed_ders}
    res = {}
    failures = []

    def record(name, value):
        res[name] = max(res.get(name, 0.0), float(value))

    # nodal balances
    inj_p = np.zeros((S, T, B))
    inj_q = np.zeros((S, T, B))
    for k, d in enumerate(gens):
        if d.id in built:
            inj_p[:, :, pos[built[d.id].bus]] += disp.p[:, :, k]
            inj_q[:, :, pos[built[d.id].bus]] += disp.q[:, :, k]
        else:
            record("unbuilt_output", np.abs(disp.p[:, :, k]).max(initial=0) / base)
            record("unbuilt_output", np.abs(disp.q[:, :, k]).max(initial=0) / base)
    for k, d in enumerate(stores):
        net = disp.p_dch[:, :, k] - disp.p_ch[:, :, k]
        if d.id in built:
            inj_p[:, :, pos[built[d.id].bus]] += net
        else:
            record("unbuilt_output", np.abs(net).max(initial=0) / base)
    poi = pos[problem.poi_bus.id]
    inj_p[:, :, poi] += disp.p_m
    inj_q[:, :, poi] += disp.q_m
    inj_p /= base
    inj_q /= base
    for k, l in enumerate(lines):
        f, t = pos[l.from_bus], pos[l.to_bus]
        inj_p[:, :, f] -= fl.pl[:, :, k]
        inj_p[:, :, t] += fl.pl[:, :, k]
        inj_q[:, :, f] -= fl.ql[:, :, k]
        inj_q[:, :, t] += fl.ql[:, :, k]
    bal_p = inj_p + disp.ls / base - ts.load_p[None] / base
    bal_q = inj_q - ts.load_q[None] / base
    record("balance_p", np.abs(bal_p).max(initial=0))
    record("balance_q", np.abs(bal_q).max(initial=0))

    # line equations, gating, limits
    on = set(plan.installed_lines)
    for k, l in enumerate(lines):
        f, t = pos[l.from_bus], pos[l.to_bus]
        gk = fl.gain[:, :, k]
        ddv = fl.dv[:, :, f] - fl.dv[:, :, t]
        dth = fl.dtheta[:, :, f] - fl.dtheta[:, :, t]
        if l.is_candidate and l.id not in on:
            record("gating", np.abs(fl.pl[:, :, k]).max(initial=0))
            record("gating", np.abs(fl.ql[:, :, k]).max(initial=0))
            continue
        record("flow_p", np.abs(fl.pl[:, :, k] - (gk * l.g * ddv - l.b * dth)).max(initial=0))
        record("flow_q", np.abs(fl.ql[:, :, k] - (-gk * l.b * ddv - l.g * dth)).max(initial=0))
        record("line_limit", max(0.0, np.abs(fl.pl[:, :, k]).max(initial=0) - l.p_limit_mw / base))
        record("line_limit", max(0.0, np.abs(fl.ql[:, :, k]).max(initial=0) - l.q_limit_mvar / base))

    # voltage box
    lo = np.array([b.dv_min for b in problem.buses])
    hi = np.array([b.dv_max for b in problem.buses])
    record("voltage", max(0.0, (lo - fl.dv).max(initial=0), (fl.dv - hi).max(initial=0)))
    record("voltage", np.abs(fl.dv[:, :, poi]).max(initial=0))

    # islanding gate and POI limit
    u = np.array([s.u for s in scen], dtype=float).reshape(S, T)
    record("islanding", np.abs(disp.p_m[u == 0]).max(initial=0) / base)
    record("poi_limit", max(0.0, np.abs(disp.p_m).max(initial=0) - problem.economics.poi_limit) / base)

    # DER output limits
    for k, d in enumerate(gens):
        cap = built[d.id].p_max if d.id in built else 0.0
        if d.kind is DerKind.DISPATCHABLE:
            record("der_output", max(0.0, (disp.p[:, :, k] - cap).max(initial=0), -disp.p[:, :, k].min(initial=0))
                   / base)
        else:
            mu = ts.gen_profiles[d.profile_id]
            record("der_output", np.abs(disp.p[:, :, k] - mu[None] * cap).max(initial=0) / base)
        record("der_reactive", max(0.0, (np.abs(disp.q[:, :, k]) - d.q_ratio * cap).max(initial=0)) / base)

    # storage window and daily balance
    for k, d in enumerate(stores):
        cap = built[d.id].p_max if d.id in built else 0.0
        emax = built[d.id].c_max if d.id in built else 0.0
        record("der_output", max(0.0, (disp.p_ch[:, :, k] - cap).max(initial=0),
                                 (disp.p_dch[:, :, k] - cap).max(initial=0)) / base)
        for idx in ts.days().values():
            flow = disp.p_ch[:, idx, k] - disp.p_dch[:, idx, k] / d.efficiency
            soc = np.cumsum(flow, axis=1)
            record("storage_window", max(0.0, -soc.min(initial=0), (soc - emax).max(initial=0)) / base)
            record("storage_daily", np.abs(soc[:, -1]).max(initial=0) / base)

    # load shedding range
    record("shedding", max(0.0, -disp.ls.min(initial=0), (disp.ls - ts.load_p[None]).max(initial=0)) / base)

    # critical capacity and siting
    need = problem.economics.critical_ratio * ts.peak_demand
    record("critical", max(0.0, need - plan.dispatchable_capacity) / base)
    for d in plan.installed_ders:
        cand = next(c for c in problem.der_candidates if c.id == d.id)
        if d.bus not in cand.candidate_buses:
            failures.append(f"DER {d.id} placed at non-candidate bus {d.bus}")
        if d.p_max > cand.p_cap * (1 + tol) + tol:
            failures.append(f"DER {d.id} exceeds its capacity cap")

    for name, value in res.items():
        if value > tol:
            failures.append(f"{name} residual {value:.3g} exceeds {tol:g}")
    return PlanCheck(res, failures, tol)
