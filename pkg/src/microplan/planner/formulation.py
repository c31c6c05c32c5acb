"""MILP formulation of the joint DER / distribution-line planning problem.

Everything inside the model is per-unit on ``problem.base_mva``; the
objective is in dollars. Line flows ``PL``/``QL`` are signed in the
from-bus to to-bus direction and linearised around flat voltage::

    PL = k g (dV_f - dV_t) - b (dθ_f - dθ_t)
    QL = -k b (dV_f - dV_t) - g (dθ_f - dθ_t)

with ``k = 1`` in stage one and ``k = 1 + dV_hat_f`` (a constant taken
from the stage-one voltages) in stage two. Candidate lines relax these
equalities with big-M terms and have their flows gated by ``z``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelSizeError, StageError
from ..grid_model.types import DerKind, PlanningProblem, present_worth
from ..milp import MilpModel, ModelBuilder

THETA_MAX = 0.3  # rad, box on angle deviations
DEFAULT_CELL_BUDGET = 250_000  # scenarios x periods x buses


@dataclass
class VariableIndex:
    """Column positions of every variable family in the planning MILP.

    Per-period arrays are indexed ``[scenario, period, member]`` in the
    order of ``gen_ids``, ``storage_ids``, ``bus_ids`` and ``line_ids``.
    """

    bus_ids: tuple
    line_ids: tuple
    gen_ids: tuple
    storage_ids: tuple
    x: dict  # (der id, bus id) -> col
    z: dict  # candidate line id -> col
    p_max: dict  # der id -> col
    c_max: dict  # storage id -> col
    p: np.ndarray
    q: np.ndarray
    p_ch: np.ndarray
    p_dch: np.ndarray
    p_m: np.ndarray
    q_m: np.ndarray
    ls: np.ndarray
    dv: np.ndarray
    dtheta: np.ndarray
    pl: np.ndarray
    ql: np.ndarray
    inj_p: dict = field(default_factory=dict)  # (gen id, bus id) -> [s, t]
    inj_q: dict = field(default_factory=dict)
    inj_s: dict = field(default_factory=dict)  # (storage id, bus id) -> [s, t], net discharge
    gain: np.ndarray | None = None  # [scenario, period, line] voltage-term factor
    num_vars: int = 0
    stage: int = 1

    def families(self):
        """Yield ``(name, column array)`` for every family."""
        for name in ("x", "z", "p_max", "c_max", "inj_p", "inj_q", "inj_s"):
            d = getattr(self, name)
            yield name, np.array([np.asarray(v).ravel() for v in d.values()], dtype=np.int64).ravel() \
                if d else np.zeros(0, dtype=np.int64)
        for name in ("p", "q", "p_ch", "p_dch", "p_m", "q_m", "ls", "dv", "dtheta", "pl", "ql"):
            yield name, np.asarray(getattr(self, name), dtype=np.int64).ravel()

    def binary_columns(self) -> np.ndarray:
        return np.array(sorted(list(self.x.values()) + list(self.z.values())), dtype=np.int64)


def _line_big_m(line, bus_lo, bus_hi, k_max, override):
    if override is not None:
        return override, override
    f_lo, f_hi = bus_lo[line.from_bus], bus_hi[line.from_bus]
    t_lo, t_hi = bus_lo[line.to_bus], bus_hi[line.to_bus]
    span_v = max(abs(f_hi - t_lo), abs(t_hi - f_lo))
    span_t = 2.0 * THETA_MAX
    m_p = k_max * abs(line.g) * span_v + abs(line.b) * span_t
    m_q = k_max * abs(line.b) * span_v + abs(line.g) * span_t
    return m_p, m_q


def build_milp(problem: PlanningProblem, stage: int = 1, dv_hat=None,
               cell_budget: int = DEFAULT_CELL_BUDGET) -> tuple[MilpModel, VariableIndex]:
    """Assemble the planning MILP for ``stage`` 1 or 2.

    ``dv_hat`` (stage 2 only) holds stage-one voltage deviations shaped
    ``[scenario, period, bus]``, or a :class:`FlowState` carrying them.
    """
    if stage not in (1, 2):
        raise StageError(f"stage must be 1 or 2, got {stage}")
    if stage == 2 and dv_hat is None:
        raise StageError("stage 2 needs the stage-one voltage deviations")
    buses = problem.buses
    lines = problem.lines
    ders = problem.der_candidates
    ts = problem.timeseries
    scen = problem.scenarios.scenarios
    econ = problem.economics
    S, T, B, L = len(scen), ts.num_periods, len(buses), len(lines)
    if S * T * B > cell_budget:
        raise ModelSizeError(f"{S} scenarios x {T} periods x {B} buses exceeds budget {cell_budget}")
    if stage == 2:
        dv_hat = np.asarray(getattr(dv_hat, "dv", dv_hat), dtype=float)
        if dv_hat.shape != (S, T, B):
            raise StageError(f"dv_hat has shape {dv_hat.shape}, expected {(S, T, B)}")

    base = problem.base_mva
    pos = problem.bus_position
    poi = pos[problem.poi_bus.id]
    gens = [d for d in ders if d.kind is not DerKind.STORAGE]
    stores = [d for d in ders if d.kind is DerKind.STORAGE]
    gpos = {d.id: k for k, d in enumerate(gens)}
    spos = {d.id: k for k, d in enumerate(stores)}

    ic_mult = sum(present_worth(econ.discount_rate, t) for t in range(1, econ.horizon_years + 1))
    year_mult = problem.year_multipliers()
    op_mult = np.array([year_mult[p.year] * p.weight for p in ts.periods])  # $ per MW held one hour
    probs = np.array([s.probability for s in scen])
    grid_s = problem.scenarios.grid_position

    mb = ModelBuilder()

    # --- investment columns -----------------------------------------------------------
    x = {}
    for d in ders:
        for m in d.candidate_buses:
            x[(d.id, m)] = mb.add_var(0, 1, binary=True, name=f"x_{d.id}_{m}")
    z = {}
    for l in lines:
        if l.is_candidate:
            z[l.id] = mb.add_var(0, 1, cost=l.annual_cost * ic_mult, binary=True, name=f"z_{l.id}")
    p_max = {}
    c_max = {}
    for d in ders:
        p_max[d.id] = mb.add_var(0, d.p_cap / base, cost=d.annual_cost_power * base * ic_mult,
                                 name=f"pmax_{d.id}")
        if d.kind is DerKind.STORAGE:
            c_max[d.id] = mb.add_var(0, d.e_cap / base, cost=d.annual_cost_energy * base * ic_mult,
                                     name=f"cmax_{d.id}")

    # --- operating columns -------------------------------------------------------------
    G, E = len(gens), len(stores)
    gen_cost = np.zeros((S, T, G))
    for k, d in enumerate(gens):
        if d.kind is DerKind.DISPATCHABLE:
            gen_cost[grid_s, :, k] = d.gen_price * base * op_mult
    p = mb.add_vars((S, T, G), lb=0.0, cost=gen_cost, name="p")
    q_lim = np.array([d.q_ratio * d.p_cap / base for d in gens]) if G else np.zeros(0)
    q = mb.add_vars((S, T, G), lb=-np.broadcast_to(q_lim, (S, T, G)), ub=np.broadcast_to(q_lim, (S, T, G)),
                    name="q")
    e_cap = np.array([d.p_cap / base for d in stores]) if E else np.zeros(0)
    p_ch = mb.add_vars((S, T, E), lb=0.0, ub=np.broadcast_to(e_cap, (S, T, E)), name="pch")
    p_dch = mb.add_vars((S, T, E), lb=0.0, ub=np.broadcast_to(e_cap, (S, T, E)), name="pdch")
    u = np.array([s.u for s in scen], dtype=float).reshape(S, T)
    pm_lim = econ.poi_limit / base * u
    pm_cost = np.zeros((S, T))
    pm_cost[grid_s] = ts.price * base * op_mult
    p_m = mb.add_vars((S, T), lb=-pm_lim, ub=pm_lim, cost=pm_cost, name="pm")
    qm_lim = econ.poi_q / base
    q_m = mb.add_vars((S, T), lb=-qm_lim, ub=qm_lim, name="qm")
    pd = np.broadcast_to(ts.load_p / base, (S, T, B))
    qd = ts.load_q / base
    ls_cost = econ.voll * base * probs[:, None, None] * op_mult[None, :, None] * np.ones((S, T, B))
    ls = mb.add_vars((S, T, B), lb=0.0, ub=pd, cost=ls_cost, name="ls")
    dv_lo = np.array([b.dv_min for b in buses])
    dv_hi = np.array([b.dv_max for b in buses])
    dv_lo[poi] = dv_hi[poi] = 0.0
    dv = mb.add_vars((S, T, B), lb=np.broadcast_to(dv_lo, (S, T, B)), ub=np.broadcast_to(dv_hi, (S, T, B)),
                     name="dv")
    th_lo = np.full(B, -THETA_MAX)
    th_hi = np.full(B, THETA_MAX)
    th_lo[poi] = th_hi[poi] = 0.0
    dtheta = mb.add_vars((S, T, B), lb=np.broadcast_to(th_lo, (S, T, B)), ub=np.broadcast_to(th_hi, (S, T, B)),
                         name="dth")
    pl_lim = np.array([l.p_limit_mw / base for l in lines])
    ql_lim = np.array([l.q_limit_mvar / base for l in lines])
    pl = mb.add_vars((S, T, L), lb=-np.broadcast_to(pl_lim, (S, T, L)), ub=np.broadcast_to(pl_lim, (S, T, L)),
                     name="pl")
    ql = mb.add_vars((S, T, L), lb=-np.broadcast_to(ql_lim, (S, T, L)), ub=np.broadcast_to(ql_lim, (S, T, L)),
                     name="ql")

    # per-bus injection auxiliaries, only for DERs with a choice of bus
    inj_p, inj_q, inj_s = {}, {}, {}
    for d in ders:
        if len(d.candidate_buses) < 2:
            continue
        cap = d.p_cap / base
        for m in d.candidate_buses:
            if d.kind is DerKind.STORAGE:
                inj_s[(d.id, m)] = mb.add_vars((S, T), lb=-cap, ub=cap, name=f"injs_{d.id}_{m}")
            else:
                inj_p[(d.id, m)] = mb.add_vars((S, T), lb=0.0, ub=cap, name=f"injp_{d.id}_{m}")
                qc = d.q_ratio * cap
                inj_q[(d.id, m)] = mb.add_vars((S, T), lb=-qc, ub=qc, name=f"injq_{d.id}_{m}")

    # --- investment rows ---------------------------------------------------------------
    for d in ders:
        cols = [x[(d.id, m)] for m in d.candidate_buses]
        if len(cols) > 1:
            mb.add_row(cols, [1.0] * len(cols), "<=", 1.0, name=f"one_bus_{d.id}")
        mb.add_row([p_max[d.id], *cols], [1.0] + [-d.p_cap / base] * len(cols), "<=", 0.0, name=f"pcap_{d.id}")
        if d.kind is DerKind.STORAGE:
            mb.add_row([c_max[d.id], *cols], [1.0] + [-d.e_cap / base] * len(cols), "<=", 0.0,
                       name=f"ecap_{d.id}")
    disp = [p_max[d.id] for d in ders if d.kind is DerKind.DISPATCHABLE]
    need = econ.critical_ratio * ts.peak_demand / base
    if disp:
        mb.add_row(disp, [1.0] * len(disp), ">=", need, name="critical")
    elif need > 0:
        mb.add_row([], [], ">=", need, name="critical")

    # --- per-period rows ---------------------------------------------------------------
    gens_at = {m: [] for m in range(B)}  # bus position -> gen positions (single-bus DERs)
    stores_at = {m: [] for m in range(B)}
    for d in gens:
        if len(d.candidate_buses) == 1:
            gens_at[pos[d.candidate_buses[0]]].append(gpos[d.id])
    for d in stores:
        if len(d.candidate_buses) == 1:
            stores_at[pos[d.candidate_buses[0]]].append(spos[d.id])
    out_lines = {m: [] for m in range(B)}
    in_lines = {m: [] for m in range(B)}
    for k, l in enumerate(lines):
        out_lines[pos[l.from_bus]].append(k)
        in_lines[pos[l.to_bus]].append(k)

    bus_lo = {b.id: (0.0 if b.is_poi else b.dv_min) for b in buses}
    bus_hi = {b.id: (0.0 if b.is_poi else b.dv_max) for b in buses}
    k_max = 1.0 + max(max(abs(v) for v in bus_lo.values()), max(abs(v) for v in bus_hi.values()))
    big_m = [_line_big_m(l, bus_lo, bus_hi, k_max if stage == 2 else 1.0, econ.big_m) for l in lines]
    days = list(ts.days().values())
    gain = np.ones((S, T, L))
    if stage == 2:
        from_pos = np.array([pos[l.from_bus] for l in lines], dtype=np.int64)
        gain = 1.0 + dv_hat[:, :, from_pos]

    for s in range(S):
        for t in range(T):
            # active and reactive balance at every bus
            for m in range(B):
                cols, vals = [], []
                qcols, qvals = [], []
                for g in gens_at[m]:
                    cols.append(p[s, t, g]); vals.append(1.0)
                    qcols.append(q[s, t, g]); qvals.append(1.0)
                for e in stores_at[m]:
                    cols += [p_dch[s, t, e], p_ch[s, t, e]]; vals += [1.0, -1.0]
                for (did, bus), arr in inj_p.items():
                    if pos[bus] == m:
                        cols.append(arr[s, t]); vals.append(1.0)
                for (did, bus), arr in inj_q.items():
                    if pos[bus] == m:
                        qcols.append(arr[s, t]); qvals.append(1.0)
                for (did, bus), arr in inj_s.items():
                    if pos[bus] == m:
                        cols.append(arr[s, t]); vals.append(1.0)
                for k in out_lines[m]:
                    cols.append(pl[s, t, k]); vals.append(-1.0)
                    qcols.append(ql[s, t, k]); qvals.append(-1.0)
                for k in in_lines[m]:
                    cols.append(pl[s, t, k]); vals.append(1.0)
                    qcols.append(ql[s, t, k]); qvals.append(1.0)
                if m == poi:
                    cols.append(p_m[s, t]); vals.append(1.0)
                    qcols.append(q_m[s, t]); qvals.append(1.0)
                cols.append(ls[s, t, m]); vals.append(1.0)
                mb.add_row(cols, vals, "=", pd[s, t, m], name=f"pbal_{s}_{t}_{buses[m].id}")
                mb.add_row(qcols, qvals, "=", qd[t, m], name=f"qbal_{s}_{t}_{buses[m].id}")

            # DER output limits
            for d in gens:
                g = gpos[d.id]
                if d.kind is DerKind.DISPATCHABLE:
                    mb.add_row([p[s, t, g], p_max[d.id]], [1.0, -1.0], "<=", 0.0)
                else:
                    mu = ts.gen_profiles[d.profile_id][t]
                    mb.add_row([p[s, t, g], p_max[d.id]], [1.0, -mu], "=", 0.0)
                if d.q_ratio > 0:
                    mb.add_row([q[s, t, g], p_max[d.id]], [1.0, -d.q_ratio], "<=", 0.0)
                    mb.add_row([q[s, t, g], p_max[d.id]], [-1.0, -d.q_ratio], "<=", 0.0)
            for d in stores:
                e = spos[d.id]
                mb.add_row([p_dch[s, t, e], p_max[d.id]], [1.0, -1.0], "<=", 0.0)
                mb.add_row([p_ch[s, t, e], p_max[d.id]], [1.0, -1.0], "<=", 0.0)

            # multi-bus injection split
            for d in gens:
                if len(d.candidate_buses) < 2:
                    continue
                g = gpos[d.id]
                cap = d.p_cap / base
                pc = [inj_p[(d.id, m)][s, t] for m in d.candidate_buses]
                qc = [inj_q[(d.id, m)][s, t] for m in d.candidate_buses]
                mb.add_row([*pc, p[s, t, g]], [1.0] * len(pc) + [-1.0], "=", 0.0)
                mb.add_row([*qc, q[s, t, g]], [1.0] * len(qc) + [-1.0], "=", 0.0)
                for m in d.candidate_buses:
                    xc = x[(d.id, m)]
                    mb.add_row([inj_p[(d.id, m)][s, t], xc], [1.0, -cap], "<=", 0.0)
                    mb.add_row([inj_q[(d.id, m)][s, t], xc], [1.0, -d.q_ratio * cap], "<=", 0.0)
                    mb.add_row([inj_q[(d.id, m)][s, t], xc], [-1.0, -d.q_ratio * cap], "<=", 0.0)
            for d in stores:
                if len(d.candidate_buses) < 2:
                    continue
                e = spos[d.id]
                cap = d.p_cap / base
                sc = [inj_s[(d.id, m)][s, t] for m in d.candidate_buses]
                mb.add_row([*sc, p_dch[s, t, e], p_ch[s, t, e]], [1.0] * len(sc) + [-1.0, 1.0], "=", 0.0)
                for m in d.candidate_buses:
                    xc = x[(d.id, m)]
                    mb.add_row([inj_s[(d.id, m)][s, t], xc], [1.0, -cap], "<=", 0.0)
                    mb.add_row([inj_s[(d.id, m)][s, t], xc], [-1.0, -cap], "<=", 0.0)

            # linearised line flows
            for k, l in enumerate(lines):
                f, to = pos[l.from_bus], pos[l.to_bus]
                kf = gain[s, t, k]
                pcols = [pl[s, t, k], dv[s, t, f], dv[s, t, to], dtheta[s, t, f], dtheta[s, t, to]]
                pvals = [1.0, -kf * l.g, kf * l.g, l.b, -l.b]
                qcols = [ql[s, t, k], dv[s, t, f], dv[s, t, to], dtheta[s, t, f], dtheta[s, t, to]]
                qvals = [1.0, kf * l.b, -kf * l.b, l.g, -l.g]
                if not l.is_candidate:
                    mb.add_row(pcols, pvals, "=", 0.0, name=f"pflow_{s}_{t}_{l.id}")
                    mb.add_row(qcols, qvals, "=", 0.0, name=f"qflow_{s}_{t}_{l.id}")
                    continue
                zc = z[l.id]
                m_p, m_q = big_m[k]
                mb.add_row(pcols + [zc], pvals + [m_p], "<=", m_p, name=f"pflow_hi_{s}_{t}_{l.id}")
                mb.add_row(pcols + [zc], pvals + [-m_p], ">=", -m_p, name=f"pflow_lo_{s}_{t}_{l.id}")
                mb.add_row(qcols + [zc], qvals + [m_q], "<=", m_q, name=f"qflow_hi_{s}_{t}_{l.id}")
                mb.add_row(qcols + [zc], qvals + [-m_q], ">=", -m_q, name=f"qflow_lo_{s}_{t}_{l.id}")
                mb.add_row([pl[s, t, k], zc], [1.0, -pl_lim[k]], "<=", 0.0)
                mb.add_row([pl[s, t, k], zc], [-1.0, -pl_lim[k]], "<=", 0.0)
                mb.add_row([ql[s, t, k], zc], [1.0, -ql_lim[k]], "<=", 0.0)
                mb.add_row([ql[s, t, k], zc], [-1.0, -ql_lim[k]], "<=", 0.0)

        # storage energy window and daily net-zero
        for d in stores:
            e = spos[d.id]
            inv_eta = 1.0 / d.efficiency
            for idx in days:
                cols, vals = [], []
                for t in idx:
                    cols += [p_ch[s, t, e], p_dch[s, t, e]]
                    vals += [1.0, -inv_eta]
                    mb.add_row(cols, vals, ">=", 0.0)
                    mb.add_row(cols + [c_max[d.id]], vals + [-1.0], "<=", 0.0)
                mb.add_row(cols, vals, "=", 0.0, name=f"netzero_{s}_{d.id}_{ts.periods[idx[0]].day}")

    model = mb.build()
    index = VariableIndex(
        bus_ids=problem.bus_ids, line_ids=tuple(l.id for l in lines), gen_ids=tuple(d.id for d in gens),
        storage_ids=tuple(d.id for d in stores), x=x, z=z, p_max=p_max, c_max=c_max,
        p=p, q=q, p_ch=p_ch, p_dch=p_dch, p_m=p_m, q_m=q_m, ls=ls, dv=dv, dtheta=dtheta, pl=pl, ql=ql,
        inj_p=inj_p, inj_q=inj_q, inj_s=inj_s, gain=gain, num_vars=model.num_vars, stage=stage,
    )
    return model, index
