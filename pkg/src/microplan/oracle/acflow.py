"""Full AC power flow by Newton-Raphson in polar coordinates.

The point of interconnection is the slack (V = 1, angle 0); every other
bus is PQ with a given net injection. Lines are series impedances
without shunt charging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import Diverged, IslandedBus

MAX_ITER = 50
TOL = 1e-8  # per-unit mismatch


@dataclass
class AcFlowResult:
    bus_ids: tuple
    line_ids: tuple
    v: np.ndarray  # p.u. magnitude
    theta: np.ndarray  # rad
    p_from: np.ndarray  # MW leaving the from bus
    q_from: np.ndarray
    p_to: np.ndarray  # MW leaving the to bus
    q_to: np.ndarray
    slack_p: float  # MW
    slack_q: float
    iterations: int
    mismatch: float

    @property
    def converged(self) -> bool:
        return self.mismatch <= TOL

    @property
    def losses_mw(self) -> float:
        return float(np.sum(self.p_from + self.p_to))

    def voltage(self, bus_id) -> float:
        return float(self.v[self.bus_ids.index(bus_id)])


def admittance_matrix(n, ends, y):
    """Dense bus admittance matrix from ``(from_pos, to_pos)`` pairs and series admittances."""
    Y = np.zeros((n, n), dtype=complex)
    for (f, t), yl in zip(ends, y):
        Y[f, f] += yl
        Y[t, t] += yl
        Y[f, t] -= yl
        Y[t, f] -= yl
    return Y


def _connected(n, ends, root):
    adj = [[] for _ in range(n)]
    for f, t in ends:
        adj[f].append(t)
        adj[t].append(f)
    seen = np.zeros(n, dtype=bool)
    stack = [root]
    seen[root] = True
    while stack:
        k = stack.pop()
        for j in adj[k]:
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def ac_power_flow(bus_ids, slack_id, lines, p_inj, q_inj, base_mva, max_iter=MAX_ITER, tol=TOL,
                  period=None) -> AcFlowResult:
    """Solve the AC power flow for net injections ``p_inj``/``q_inj`` (MW, MVAr).

    Parameters
    ----------
    bus_ids : sequence of int
        Bus order of the injection vectors.
    slack_id : int
        Slack bus; its injection entries are ignored.
    lines : sequence of Line
        In-service lines; ``g``/``b`` are used as the series admittance.
    period : optional
        Only used to label a :class:`Diverged` error.

    Raises
    ------
    IslandedBus
        A bus has no path to the slack.
    Diverged
        Mismatch still above ``tol`` after ``max_iter`` iterations.
    """
    bus_ids = tuple(bus_ids)
    pos = {b: k for k, b in enumerate(bus_ids)}
    n = len(bus_ids)
    s = pos[slack_id]
    ends = [(pos[l.from_bus], pos[l.to_bus]) for l in lines]
    y = np.array([complex(l.g, l.b) for l in lines])
    reach = _connected(n, ends, s)
    if not reach.all():
        lost = [bus_ids[k] for k in np.flatnonzero(~reach)]
        raise IslandedBus(f"buses {lost} have no path to the slack bus {slack_id}")
    Y = admittance_matrix(n, ends, y)
    G, B = Y.real, Y.imag
    p_spec = np.asarray(p_inj, dtype=float) / base_mva
    q_spec = np.asarray(q_inj, dtype=float) / base_mva
    pq = np.array([k for k in range(n) if k != s], dtype=np.int64)
    v = np.ones(n)
    th = np.zeros(n)

    def injections(v, th):
        vc = v * np.exp(1j * th)
        sc = vc * np.conj(Y @ vc)
        return sc.real, sc.imag

    it = 0
    while True:
        p, q = injections(v, th)
        mis = np.concatenate([p_spec[pq] - p[pq], q_spec[pq] - q[pq]])
        worst = float(np.abs(mis).max(initial=0.0))
        if worst <= tol:
            break
        if it >= max_iter or not np.isfinite(worst):
            raise Diverged(f"power flow did not converge in {max_iter} iterations (mismatch {worst:.3g})",
                           mismatch=worst, period=period)
        # polar Jacobian
        dth = th[:, None] - th[None, :]
        cos, sin = np.cos(dth), np.sin(dth)
        vv = v[:, None] * v[None, :]
        dp_dth = vv * (G * sin - B * cos)
        dq_dth = -vv * (G * cos + B * sin)
        dp_dv = v[:, None] * (G * cos + B * sin)
        dq_dv = v[:, None] * (G * sin - B * cos)
        np.fill_diagonal(dp_dth, -q - B.diagonal() * v * v)
        np.fill_diagonal(dq_dth, p - G.diagonal() * v * v)
        np.fill_diagonal(dp_dv, p / v + G.diagonal() * v)
        np.fill_diagonal(dq_dv, q / v - B.diagonal() * v)
        J = np.block([[dp_dth[np.ix_(pq, pq)], dp_dv[np.ix_(pq, pq)]],
                      [dq_dth[np.ix_(pq, pq)], dq_dv[np.ix_(pq, pq)]]])
        try:
            step = np.linalg.solve(J, mis)
        except np.linalg.LinAlgError as exc:
            raise Diverged(f"singular Jacobian: {exc}", mismatch=worst, period=period) from exc
        k = len(pq)
        th[pq] += step[:k]
        v[pq] += step[k:]
        it += 1

    vc = v * np.exp(1j * th)
    f_idx = np.array([e[0] for e in ends], dtype=np.int64)
    t_idx = np.array([e[1] for e in ends], dtype=np.int64)
    if len(lines):
        i_ft = y * (vc[f_idx] - vc[t_idx])
        s_ft = vc[f_idx] * np.conj(i_ft) * base_mva
        s_tf = vc[t_idx] * np.conj(-i_ft) * base_mva
    else:
        s_ft = s_tf = np.zeros(0, dtype=complex)
    p, q = injections(v, th)
    return AcFlowResult(bus_ids=bus_ids, line_ids=tuple(l.id for l in lines), v=v, theta=th,
                        p_from=s_ft.real, q_from=s_ft.imag, p_to=s_tf.real, q_to=s_tf.imag,
                        slack_p=float(p[s] * base_mva), slack_q=float(q[s] * base_mva), iterations=it,
                        mismatch=worst)

