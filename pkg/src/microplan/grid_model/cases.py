"""Built-in planning cases: the 33-bus feeder and small oracle-sized toys.

Synthetic profile shapes for the 33-bus case (all hours 0..23):

* load: nominal bus load x ``0.6 + 0.4 * f_d * max(0.8 * exp(-((h-11)/2.5)**2), exp(-((h-19)/2)**2))``
  where ``f_d`` falls linearly from 1.0 on the first representative day to
  0.85 on the last; no year-on-year growth.
* price: ``30 + 60 * peak_shape(h)`` $/MWh, i.e. the first-day load shape
  mapped onto 30..90 $/MWh.
* solar: ``sin(pi * (h - 7) / 12)`` clamped to [0, 1], zero outside 7..19.
* wind: seeded AR(1) noise (coefficient 0.85), rescaled to [0.1, 0.9].

Nominal bus loads are the standard feeder loads scaled so the aggregate
peak is 2.7 MW.
"""

from __future__ import annotations

import math

import numpy as np

from .types import (DAYS_PER_YEAR, Bus, DerCandidate, DerKind, Economics, Line, LineStatus, Period,
                    PlanningProblem, Scenario, ScenarioSet, TimeSeriesBundle)

BASE_MVA_33 = 10.0
BASE_KV_33 = 12.66
PEAK_MW_33 = 2.7
EXISTING_LIMIT_MW = 5.0

# (from, to, R ohm, X ohm)
BRANCHES_33 = (
    (1, 2, 0.0922, 0.0470), (2, 3, 0.4930, 0.2511), (3, 4, 0.3660, 0.1864), (4, 5, 0.3811, 0.1941),
    (5, 6, 0.8190, 0.7070), (6, 7, 0.1872, 0.6188), (7, 8, 0.7114, 0.2351), (8, 9, 1.0300, 0.7400),
    (9, 10, 1.0440, 0.7400), (10, 11, 0.1966, 0.0650), (11, 12, 0.3744, 0.1238), (12, 13, 1.4680, 1.1550),
    (13, 14, 0.5416, 0.7129), (14, 15, 0.5910, 0.5260), (15, 16, 0.7463, 0.5450), (16, 17, 1.2890, 1.7210),
    (17, 18, 0.7320, 0.5740), (2, 19, 0.1640, 0.1565), (19, 20, 1.5042, 1.3554), (20, 21, 0.4095, 0.4784),
    (21, 22, 0.7089, 0.9373), (3, 23, 0.4512, 0.3083), (23, 24, 0.8980, 0.7091), (24, 25, 0.8960, 0.7011),
    (6, 26, 0.2030, 0.1034), (26, 27, 0.2842, 0.1447), (27, 28, 1.0590, 0.9337), (28, 29, 0.8042, 0.7006),
    (29, 30, 0.5075, 0.2585), (30, 31, 0.9744, 0.9630), (31, 32, 0.3105, 0.3619), (32, 33, 0.3410, 0.5302),
)

# bus: (kW, kVAr), standard feeder loads; bus 1 unloaded
LOADS_33 = {
    2: (100, 60), 3: (90, 40), 4: (120, 80), 5: (60, 30), 6: (60, 20), 7: (200, 100), 8: (200, 100),
    9: (60, 20), 10: (60, 20), 11: (45, 30), 12: (60, 35), 13: (60, 35), 14: (120, 80), 15: (60, 10),
    16: (60, 20), 17: (60, 20), 18: (90, 40), 19: (90, 40), 20: (90, 40), 21: (90, 40), 22: (90, 40),
    23: (90, 50), 24: (420, 200), 25: (420, 200), 26: (60, 25), 27: (60, 25), 28: (60, 20), 29: (120, 70),
    30: (200, 600), 31: (150, 70), 32: (210, 100), 33: (60, 40),
}

# id, from, to, R ohm, X ohm, capacity kW, annualised cost $
CANDIDATE_LINES_33 = (
    (33, 12, 13, 1.468, 1.155, 500, 37749), (34, 13, 14, 0.5416, 0.7129, 450, 12534),
    (35, 14, 15, 0.591, 0.526, 300, 9118), (36, 15, 16, 0.7463, 0.545, 250, 9595),
    (37, 16, 17, 1.289, 1.721, 250, 16573), (38, 17, 18, 0.732, 0.574, 100, 3765),
    (39, 20, 21, 0.4095, 0.4784, 210, 4423), (40, 21, 22, 0.7089, 0.9373, 110, 4010),
    (41, 23, 24, 0.898, 0.7091, 1050, 48492), (42, 24, 25, 0.896, 0.7011, 500, 23040),
    (43, 30, 31, 0.9744, 0.963, 500, 25056),
)

# id, name, kind, bus, P cap MW, $/MWh, $/MW-yr, profile
DG_CANDIDATES_33 = (
    (1, "Gas", DerKind.DISPATCHABLE, 17, 3.0, 90.0, 50_000.0, None),
    (2, "Gas", DerKind.DISPATCHABLE, 21, 3.0, 90.0, 50_000.0, None),
    (3, "Gas", DerKind.DISPATCHABLE, 32, 1.0, 70.0, 70_000.0, None),
    (4, "Gas", DerKind.DISPATCHABLE, 24, 1.0, 70.0, 70_000.0, None),
    (5, "Wind", DerKind.NONDISPATCHABLE, 15, 2.0, 0.0, 132_000.0, "wind"),
    (6, "Solar", DerKind.NONDISPATCHABLE, 15, 2.0, 0.0, 133_000.0, "solar"),
)
DES_33 = dict(id=7, name="DES", bus=15, p_cap=1.0, e_cap=6.0, cost_power=60_000.0, cost_energy=30_000.0,
              efficiency=0.95)

DG_Q_RATIO = 0.6


def peak_shape(hour: float) -> float:
    """Two-peak daily curve in [0, 1]: morning bump at 11h (0.8), evening peak at 19h (1.0)."""
    morning = 0.8 * math.exp(-(((hour - 11.0) / 2.5) ** 2))
    evening = math.exp(-(((hour - 19.0) / 2.0) ** 2))
    return max(morning, evening)


def load_shape(hour: float, day_factor: float = 1.0) -> float:
    return 0.6 + 0.4 * day_factor * peak_shape(hour)


def solar_shape(hour: float) -> float:
    if hour < 7 or hour > 19:
        return 0.0
    return min(1.0, max(0.0, math.sin(math.pi * (hour - 7.0) / 12.0)))


def wind_series(rng: np.random.Generator, n: int) -> np.ndarray:
    noise = rng.standard_normal(n)
    out = np.empty(n)
    level = 0.0
    for k in range(n):
        level = 0.85 * level + noise[k]
        out[k] = level
    lo, hi = out.min(), out.max()
    if hi - lo < 1e-12:
        return np.full(n, 0.5)
    return 0.1 + 0.8 * (out - lo) / (hi - lo)


def _day_factors(n_days: int) -> list[float]:
    if n_days == 1:
        return [1.0]
    return [1.0 - 0.15 * k / (n_days - 1) for k in range(n_days)]


def builtin_case33(profile_seed: int = 1, rep_days_per_year: int = 2, horizon_years: int = 20,
                   critical_ratio: float = 0.4) -> PlanningProblem:
    """The 33-bus microgrid with candidate DGs, one DES and eleven candidate lines."""
    if rep_days_per_year < 1 or horizon_years < 1:
        raise ValueError("rep_days_per_year and horizon_years must be at least 1")
    base_mva, base_kv = BASE_MVA_33, BASE_KV_33
    buses = tuple(Bus(m, is_poi=(m == 1)) for m in range(1, 34))
    lines = [Line.from_ohms(k + 1, f, t, r, x, EXISTING_LIMIT_MW, EXISTING_LIMIT_MW, base_kv, base_mva)
             for k, (f, t, r, x) in enumerate(BRANCHES_33)]
    for lid, f, t, r, x, kw, cost in CANDIDATE_LINES_33:
        lines.append(Line.from_ohms(lid, f, t, r, x, kw / 1000.0, kw / 1000.0, base_kv, base_mva,
                                    LineStatus.CANDIDATE, float(cost)))
    ders = [DerCandidate(id=i, kind=kind, candidate_buses=(bus,), p_cap=cap, annual_cost_power=cc,
                         gen_price=price, profile_id=prof, q_ratio=DG_Q_RATIO, name=name)
            for i, name, kind, bus, cap, price, cc, prof in DG_CANDIDATES_33]
    s = DES_33
    ders.append(DerCandidate(id=s["id"], kind=DerKind.STORAGE, candidate_buses=(s["bus"],), p_cap=s["p_cap"],
                             annual_cost_power=s["cost_power"], e_cap=s["e_cap"],
                             annual_cost_energy=s["cost_energy"], efficiency=s["efficiency"], q_ratio=0.0,
                             name=s["name"]))

    total_kw = sum(p for p, _ in LOADS_33.values())
    scale = PEAK_MW_33 * 1000.0 / total_kw
    nom_p = np.array([LOADS_33.get(m, (0, 0))[0] for m in range(1, 34)], dtype=float) * scale / 1000.0
    nom_q = np.array([LOADS_33.get(m, (0, 0))[1] for m in range(1, 34)], dtype=float) * scale / 1000.0

    weight = DAYS_PER_YEAR / rep_days_per_year
    periods, shapes, prices, solar = [], [], [], []
    for d, f in enumerate(_day_factors(rep_days_per_year), start=1):
        for h in range(24):
            periods.append(Period(1, d, h, weight))
            shapes.append(load_shape(h, f))
            prices.append(30.0 + 60.0 * peak_shape(h))
            solar.append(solar_shape(h))
    shapes = np.array(shapes)
    rng = np.random.default_rng(profile_seed)
    T = len(periods)
    ts = TimeSeriesBundle(tuple(periods), np.outer(shapes, nom_p), np.outer(shapes, nom_q), np.array(prices),
                          {"solar": np.array(solar), "wind": wind_series(rng, T)})
    econ = Economics(discount_rate=0.05, voll=10_000.0, critical_ratio=critical_ratio,
                     poi_limit=EXISTING_LIMIT_MW, horizon_years=horizon_years)
    return PlanningProblem(buses, tuple(lines), tuple(ders), ts, ScenarioSet.grid_only(T), econ,
                           base_mva, base_kv, "builtin33")


def toy4(critical_ratio: float = 0.4) -> PlanningProblem:
    """Four-bus radial toy: one existing line, two candidate lines, one DG and one DES, four periods."""
    base_mva, base_kv = 10.0, 12.66
    buses = tuple(Bus(m, is_poi=(m == 1)) for m in range(1, 5))
    lines = (
        Line.from_ohms(1, 1, 2, 0.5, 0.4, 2.0, 2.0, base_kv, base_mva),
        Line.from_ohms(2, 2, 3, 0.9, 0.7, 0.6, 0.6, base_kv, base_mva, LineStatus.CANDIDATE, 9_000.0),
        Line.from_ohms(3, 2, 4, 0.7, 0.6, 0.5, 0.5, base_kv, base_mva, LineStatus.CANDIDATE, 6_000.0),
    )
    ders = (
        DerCandidate(1, DerKind.DISPATCHABLE, (3,), p_cap=1.0, annual_cost_power=60_000.0, gen_price=75.0,
                     name="Gas"),
        DerCandidate(2, DerKind.STORAGE, (4,), p_cap=0.5, annual_cost_power=40_000.0, e_cap=2.0,
                     annual_cost_energy=20_000.0, efficiency=0.95, q_ratio=0.0, name="DES"),
    )
    hours = (17, 18, 19, 20)
    shape = np.array([0.8, 1.0, 0.9, 0.6])
    nom_p = np.array([0.0, 0.4, 0.3, 0.2])
    nom_q = np.array([0.0, 0.15, 0.1, 0.08])
    periods = tuple(Period(1, 1, h, DAYS_PER_YEAR) for h in hours)
    ts = TimeSeriesBundle(periods, np.outer(shape, nom_p), np.outer(shape, nom_q),
                          np.array([50.0, 95.0, 80.0, 40.0]))
    econ = Economics(discount_rate=0.05, voll=2_000.0, critical_ratio=critical_ratio, poi_limit=2.0,
                     horizon_years=5)
    return PlanningProblem(buses, lines, ders, ts, ScenarioSet.grid_only(4), econ, base_mva, base_kv, "toy4")


def random_toy(seed: int, max_buses: int = 6, max_periods: int = 8, islanding: bool = True) -> PlanningProblem:
    """Seeded small planning case (at most ``max_buses`` buses, 7 binaries, ``max_periods`` periods).

    The network is a random tree of existing lines plus one to three
    candidate lines; one or two DERs get one or two candidate buses each.
    With ``islanding`` a second scenario islands the grid for two hours.
    """
    rng = np.random.default_rng(seed)
    base_mva, base_kv = 10.0, 12.66
    n_bus = int(rng.integers(3, max_buses + 1))
    buses = tuple(Bus(m, is_poi=(m == 1), dv_min=-0.06, dv_max=0.06) for m in range(1, n_bus + 1))
    lines = []
    lid = 1
    for m in range(2, n_bus + 1):
        parent = int(rng.integers(1, m))
        r, x = rng.uniform(0.3, 1.2), rng.uniform(0.2, 1.0)
        lines.append(Line.from_ohms(lid, parent, m, r, x, float(rng.uniform(0.25, 1.0)), 1.0, base_kv, base_mva))
        lid += 1
    n_cand = int(rng.integers(1, 4))
    for _ in range(n_cand):
        f, t = sorted(rng.choice(np.arange(1, n_bus + 1), size=2, replace=False).tolist())
        r, x = rng.uniform(0.3, 1.2), rng.uniform(0.2, 1.0)
        lines.append(Line.from_ohms(lid, f, t, r, x, float(rng.uniform(0.3, 1.0)), 1.0, base_kv, base_mva,
                                    LineStatus.CANDIDATE, float(rng.integers(2_000, 20_000))))
        lid += 1
    T = int(rng.integers(3, max_periods + 1))
    hours = list(range(24 - T, 24)) if T <= 24 else list(range(T))
    shape = 0.6 + 0.4 * rng.uniform(0, 1, T)
    nom_p = np.concatenate([[0.0], rng.uniform(0.05, 0.4, n_bus - 1)])
    nom_q = nom_p * rng.uniform(0.2, 0.5, n_bus)
    price = rng.uniform(20, 110, T)
    mu = np.clip(rng.uniform(-0.2, 1.0, T), 0, 1)
    ders = []
    others = np.arange(2, n_bus + 1)
    n_der = int(rng.integers(1, 3))
    kinds = [DerKind.DISPATCHABLE, (DerKind.STORAGE, DerKind.NONDISPATCHABLE)[int(rng.integers(0, 2))]]
    for i in range(n_der):
        kind = kinds[i]
        k_bus = int(rng.integers(1, min(2, others.size) + 1))
        cand = tuple(sorted(int(v) for v in rng.choice(others, size=k_bus, replace=False)))
        if kind is DerKind.DISPATCHABLE:
            ders.append(DerCandidate(i + 1, kind, cand, p_cap=float(rng.uniform(0.8, 2.0)),
                                     annual_cost_power=float(rng.uniform(30_000, 80_000)),
                                     gen_price=float(rng.uniform(40, 100)), name="Gas"))
        elif kind is DerKind.STORAGE:
            ders.append(DerCandidate(i + 1, kind, cand, p_cap=float(rng.uniform(0.3, 1.0)),
                                     annual_cost_power=float(rng.uniform(20_000, 60_000)),
                                     e_cap=float(rng.uniform(0.5, 3.0)),
                                     annual_cost_energy=float(rng.uniform(10_000, 30_000)),
                                     efficiency=float(rng.uniform(0.85, 1.0)), q_ratio=0.0, name="DES"))
        else:
            ders.append(DerCandidate(i + 1, kind, cand, p_cap=float(rng.uniform(0.5, 1.5)),
                                     annual_cost_power=float(rng.uniform(40_000, 120_000)), profile_id="pv",
                                     name="Solar"))
    periods = tuple(Period(1, 1, h, DAYS_PER_YEAR) for h in hours)
    ts = TimeSeriesBundle(periods, np.outer(shape, nom_p), np.outer(shape, nom_q), price, {"pv": mu})
    scen = [Scenario(0, 0.95 if islanding else 1.0, np.ones(T, dtype=np.int64))]
    if islanding:
        u = np.ones(T, dtype=np.int64)
        u[: min(2, T)] = 0
        scen.append(Scenario(1, 0.05, u))
    dispatchable = sum(d.p_cap for d in ders if d.kind is DerKind.DISPATCHABLE)
    beta = float(rng.uniform(0.0, 0.6))
    peak = float(ts.peak_demand)
    if peak > 0 and dispatchable < beta * peak:
        beta = dispatchable / peak
    econ = Economics(discount_rate=0.05, voll=float(rng.uniform(1_000, 5_000)), critical_ratio=beta,
                     poi_limit=float(rng.uniform(0.8, 3.0)), horizon_years=int(rng.integers(1, 6)))
    return PlanningProblem(buses, tuple(lines), tuple(ders), ts, ScenarioSet(tuple(scen)), econ, base_mva,
                           base_kv, f"toy-{seed}")
