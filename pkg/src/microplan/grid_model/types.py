"""Immutable planning-case data types.

Powers are kept in MW/MVAr and energies in MWh on these types; the
formulation converts to per-unit with ``base_mva``. Line admittances
``g``/``b`` are per-unit series values derived from the ohmic impedance.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..errors import ZeroImpedance

DAYS_PER_YEAR = 365.0


class LineStatus(str, Enum):
    EXISTING = "existing"
    CANDIDATE = "candidate"


class DerKind(str, Enum):
    DISPATCHABLE = "dispatchable"
    NONDISPATCHABLE = "nondispatchable"
    STORAGE = "storage"


def per_unitize(r_ohm: float, x_ohm: float, base_kv: float, base_mva: float) -> tuple[float, float]:
    """Series admittance ``(g, b)`` in per-unit for an ``r + jx`` ohmic impedance.

    Uses ``z_base = base_kv**2 / base_mva``; ``b`` is negative for an
    inductive line.

    >>> per_unitize(1.0, 0.0, 1.0, 1.0)
    (1.0, 0.0)
    >>> per_unitize(0.0, 1.0, 1.0, 1.0)
    (0.0, -1.0)
    """
    if not (base_kv > 0 and base_mva > 0):
        raise ValueError("base_kv and base_mva must be positive")
    z_base = base_kv * base_kv / base_mva
    r = r_ohm / z_base
    x = x_ohm / z_base
    mag = r * r + x * x
    if mag == 0.0:
        raise ZeroImpedance(f"line impedance r={r_ohm}, x={x_ohm} is zero")
    g = r / mag
    b = -x / mag
    return g + 0.0, b + 0.0  # normalise -0.0


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bus:
    id: int
    is_poi: bool = False
    dv_min: float = -0.05
    dv_max: float = 0.05


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    r_ohm: float
    x_ohm: float
    g: float
    b: float
    p_limit_mw: float
    q_limit_mvar: float
    status: LineStatus = LineStatus.EXISTING
    annual_cost: float = 0.0

    @property
    def is_candidate(self) -> bool:
        return self.status is LineStatus.CANDIDATE

    @classmethod
    def from_ohms(cls, id, from_bus, to_bus, r_ohm, x_ohm, p_limit_mw, q_limit_mvar,
                  base_kv, base_mva, status=LineStatus.EXISTING, annual_cost=0.0) -> "Line":
        g, b = per_unitize(r_ohm, x_ohm, base_kv, base_mva)
        return cls(int(id), int(from_bus), int(to_bus), float(r_ohm), float(x_ohm), g, b,
                   float(p_limit_mw), float(q_limit_mvar), LineStatus(status), float(annual_cost))


@dataclass(frozen=True)
class DerCandidate:
    id: int
    kind: DerKind
    candidate_buses: tuple[int, ...]
    p_cap: float  # MW
    annual_cost_power: float  # $/MW-yr
    gen_price: float = 0.0  # $/MWh, dispatchable only
    e_cap: float = 0.0  # MWh, storage only
    annual_cost_energy: float = 0.0  # $/MWh-yr, storage only
    efficiency: float = 1.0  # storage only
    profile_id: str | None = None  # nondispatchable only
    q_ratio: float = 0.6
    name: str = ""

    @property
    def is_storage(self) -> bool:
        return self.kind is DerKind.STORAGE

    @property
    def is_dispatchable(self) -> bool:
        return self.kind is DerKind.DISPATCHABLE

    @property
    def is_generator(self) -> bool:
        return self.kind is not DerKind.STORAGE


@dataclass(frozen=True)
class Period:
    year: int
    day: int
    hour: int
    weight: float  # calendar days represented by this period's day


@dataclass(frozen=True, eq=False)
class TimeSeriesBundle:
    """Hourly profiles over representative days.

    ``load_p``/``load_q`` have shape ``(periods, buses)`` in bus order of
    the owning problem. Profiles given for a modelled year apply to every
    calendar year up to the next modelled year.
    """

    periods: tuple[Period, ...]
    load_p: np.ndarray
    load_q: np.ndarray
    price: np.ndarray
    gen_profiles: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "load_p", _frozen_array(self.load_p))
        object.__setattr__(self, "load_q", _frozen_array(self.load_q))
        object.__setattr__(self, "price", _frozen_array(self.price))
        object.__setattr__(self, "gen_profiles",
                           {str(k): _frozen_array(v) for k, v in sorted(self.gen_profiles.items())})

    @property
    def num_periods(self) -> int:
        return len(self.periods)

    @property
    def peak_demand(self) -> float:
        """Maximum over periods of total active load (MW), recomputed from the profiles."""
        if self.load_p.size == 0:
            return 0.0
        return float(self.load_p.sum(axis=1).max())

    @property
    def years(self) -> tuple[int, ...]:
        return tuple(sorted({p.year for p in self.periods}))

    @property
    def weights(self) -> np.ndarray:
        return np.array([p.weight for p in self.periods], dtype=float)

    def days(self):
        """Group period positions by ``(year, day)`` in hour order."""
        groups: dict[tuple[int, int], list[int]] = {}
        for k, p in enumerate(self.periods):
            groups.setdefault((p.year, p.day), []).append(k)
        return {key: sorted(idx, key=lambda k: self.periods[k].hour) for key, idx in groups.items()}

    def scaled(self, load: float = 1.0, price: float = 1.0) -> "TimeSeriesBundle":
        return TimeSeriesBundle(self.periods, self.load_p * load, self.load_q * load, self.price * price,
                                dict(self.gen_profiles))

    def __eq__(self, other):
        if not isinstance(other, TimeSeriesBundle):
            return NotImplemented
        return (self.periods == other.periods
                and np.array_equal(self.load_p, other.load_p)
                and np.array_equal(self.load_q, other.load_q)
                and np.array_equal(self.price, other.price)
                and self.gen_profiles.keys() == other.gen_profiles.keys()
                and all(np.array_equal(v, other.gen_profiles[k]) for k, v in self.gen_profiles.items()))


@dataclass(frozen=True, eq=False)
class Scenario:
    id: int
    probability: float
    u: np.ndarray  # 1 grid-connected, 0 islanded, per period

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen_array(self.u, dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (self.id == other.id and self.probability == other.probability
                and np.array_equal(self.u, other.u))


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...]
    grid_scenario_id: int = 0

    @classmethod
    def grid_only(cls, num_periods: int) -> "ScenarioSet":
        return cls((Scenario(0, 1.0, np.ones(num_periods, dtype=np.int64)),))

    def __len__(self):
        return len(self.scenarios)

    @property
    def grid_position(self) -> int:
        for k, s in enumerate(self.scenarios):
            if s.id == self.grid_scenario_id:
                return k
        raise KeyError(f"grid scenario {self.grid_scenario_id} missing")


@dataclass(frozen=True)
class Economics:
    discount_rate: float = 0.05
    voll: float = 10_000.0
    critical_ratio: float = 0.4
    poi_limit: float = 5.0  # MW
    poi_q_limit: float | None = None  # MVAr; None means same as poi_limit
    horizon_years: int = 20
    big_m: float | None = None  # None derives a per-line constant

    @property
    def poi_q(self) -> float:
        return self.poi_limit if self.poi_q_limit is None else self.poi_q_limit


@dataclass(frozen=True)
class PlanningProblem:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    der_candidates: tuple[DerCandidate, ...]
    timeseries: TimeSeriesBundle
    scenarios: ScenarioSet
    economics: Economics
    base_mva: float = 10.0
    base_kv: float = 12.66
    name: str = ""

    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @property
    def bus_position(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def poi_bus(self) -> Bus:
        return next(b for b in self.buses if b.is_poi)

    @property
    def candidate_lines(self) -> tuple[Line, ...]:
        return tuple(l for l in self.lines if l.is_candidate)

    @property
    def peak_demand(self) -> float:
        return self.timeseries.peak_demand

    def year_multipliers(self) -> dict[int, float]:
        """Discounted weight of each modelled year, summing the years it stands for."""
        modelled = self.timeseries.years
        r = self.economics.discount_rate
        mult = {y: 0.0 for y in modelled}
        for t in range(1, self.economics.horizon_years + 1):
            owners = [y for y in modelled if y <= t]
            if owners:
                mult[max(owners)] += present_worth(r, t)
        return mult

    def year_owner(self, t: int) -> int | None:
        owners = [y for y in self.timeseries.years if y <= t]
        return max(owners) if owners else None

    # convenience variants used by the sweeps
    def with_economics(self, **changes) -> "PlanningProblem":
        return dataclasses.replace(self, economics=dataclasses.replace(self.economics, **changes))

    def scaled(self, load: float = 1.0, price: float = 1.0) -> "PlanningProblem":
        return dataclasses.replace(self, timeseries=self.timeseries.scaled(load, price))

    def without_candidate_lines(self) -> "PlanningProblem":
        return dataclasses.replace(self, lines=tuple(l for l in self.lines if not l.is_candidate))

    def with_dv_bounds(self, dv: float) -> "PlanningProblem":
        return dataclasses.replace(
            self, buses=tuple(dataclasses.replace(b, dv_min=-dv, dv_max=dv) for b in self.buses))


def present_worth(r: float, t: int) -> float:
    """Present-worth factor ``1 / (1 + r) ** (t - 1)`` of year ``t``."""
    if r < 0:
        raise ValueError("discount rate must be non-negative")
    if t < 1:
        raise ValueError("year index starts at 1")
    return 1.0 / (1.0 + r) ** (t - 1)
