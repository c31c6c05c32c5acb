"""TOML planning-case files and CSV profile tables.

Case-file layout (all sections required except where noted)::

    name = "ieee33"            # optional
    base_mva = 10.0
    base_kv = 12.66

    [economics]
    discount_rate = 0.05
    voll = 10000.0             # $/MWh
    critical_ratio = 0.4
    poi_limit_mw = 5.0
    poi_q_limit_mvar = 5.0     # optional, defaults to poi_limit_mw
    horizon_years = 20
    big_m = 1.0                # optional, per-line constant derived when absent

    [[buses]]
    id = 1
    poi = true                 # optional, default false
    dv_min = -0.05             # optional
    dv_max = 0.05              # optional

    [[lines]]
    id = 1
    from = 1
    to = 2
    r_ohm = 0.0922
    x_ohm = 0.047
    p_limit_mw = 5.0
    q_limit_mvar = 5.0
    status = "existing"        # or "candidate"
    annual_cost = 0.0          # $/yr

    [[ders]]
    id = 1
    kind = "dispatchable"      # "nondispatchable" | "storage"
    buses = [17]
    p_cap_mw = 3.0
    annual_cost_power = 50000.0
    gen_price = 90.0           # dispatchable
    profile = "solar"          # nondispatchable
    e_cap_mwh = 6.0            # storage
    annual_cost_energy = 30000.0
    efficiency = 0.95
    q_ratio = 0.6              # optional
    name = "Gas"               # optional

    [profiles]
    year = [1, 1, ...]
    day = [1, 1, ...]
    hour = [0, 1, ...]
    weight = [182.5, ...]      # days represented by each period's day
    csv = "profiles.csv"       # either this ...
    [profiles.series]          # ... or inline series
    price = [...]
    "load_p:5" = [...]         # MW at bus 5; absent buses carry no load
    "load_q:5" = [...]
    "mu:solar" = [...]

    [[scenarios]]
    id = 0
    probability = 1.0
    u = [1, 1, ...]            # optional, all ones when absent

The CSV form has header ``period_id`` followed by series names as above.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np
import tomli_w

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from ..errors import ParseError, SchemaError, UnitError, ZeroImpedance
from .types import (Bus, DerCandidate, DerKind, Economics, Line, LineStatus, Period, PlanningProblem,
                    Scenario, ScenarioSet, TimeSeriesBundle)

_TOP = {"name": False, "base_mva": True, "base_kv": True, "economics": True, "buses": True, "lines": True,
        "ders": True, "profiles": True, "scenarios": True}
_ECON = {"discount_rate": True, "voll": True, "critical_ratio": True, "poi_limit_mw": True,
         "poi_q_limit_mvar": False, "horizon_years": True, "big_m": False}
_BUS = {"id": True, "poi": False, "dv_min": False, "dv_max": False}
_LINE = {"id": True, "from": True, "to": True, "r_ohm": True, "x_ohm": True, "p_limit_mw": True,
         "q_limit_mvar": True, "status": False, "annual_cost": False}
_DER_COMMON = {"id": True, "kind": True, "buses": True, "p_cap_mw": True, "annual_cost_power": True,
               "q_ratio": False, "name": False}
_DER_EXTRA = {
    DerKind.DISPATCHABLE: {"gen_price": True},
    DerKind.NONDISPATCHABLE: {"profile": True},
    DerKind.STORAGE: {"e_cap_mwh": True, "annual_cost_energy": True, "efficiency": True},
}
_PROFILES = {"year": True, "day": True, "hour": True, "weight": True, "csv": False, "series": False}
_SCEN = {"id": True, "probability": True, "u": False}


def _check_keys(table, spec, where):
    if not isinstance(table, dict):
        raise SchemaError(f"{where}: expected a table")
    unknown = sorted(set(table) - set(spec))
    if unknown:
        raise SchemaError(f"{where}: unknown key(s) {', '.join(unknown)}")
    missing = sorted(k for k, req in spec.items() if req and k not in table)
    if missing:
        raise SchemaError(f"{where}: missing key(s) {', '.join(missing)}")


def _num(table, key, where, default=None):
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}: {key} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise UnitError(f"{where}: {key} must be finite")
    return v


def _int(table, key, where, default=None):
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}: {key} must be an integer")
    return v


def _nonneg(value, key, where):
    if value is not None and value < 0:
        raise UnitError(f"{where}: {key} must be non-negative, got {value}")
    return value


def _array(values, where, length=None, dtype=float):
    if not isinstance(values, list):
        raise SchemaError(f"{where}: expected an array")
    if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in values):
        raise SchemaError(f"{where}: array entries must be numbers")
    arr = np.array(values, dtype=dtype)
    if length is not None and arr.shape != (length,):
        raise SchemaError(f"{where}: expected {length} entries, got {arr.size}")
    return arr


def read_profiles_csv(path) -> dict[str, np.ndarray]:
    """Read a profile table: header ``period_id`` then one column per series."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read profile CSV {path}: {exc}") from exc
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "period_id":
        raise SchemaError(f"{path}: first header column must be period_id")
    header = rows[0][1:]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate series names")
    body = [r for r in rows[1:] if r]
    data = {name: [] for name in header}
    for k, row in enumerate(body):
        if len(row) != len(header) + 1:
            raise ParseError(f"{path}: row {k + 2} has {len(row)} fields, expected {len(header) + 1}")
        try:
            if int(row[0]) != k:
                raise SchemaError(f"{path}: period_id must count up from 0")
            for name, cell in zip(header, row[1:]):
                data[name].append(float(cell))
        except ValueError as exc:
            raise ParseError(f"{path}: row {k + 2}: {exc}") from exc
    return {name: np.array(vals) for name, vals in data.items()}


def write_profiles_csv(path, series: dict[str, np.ndarray]) -> Path:
    path = Path(path)
    names = list(series)
    n = len(next(iter(series.values()))) if series else 0
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period_id", *names])
        for k in range(n):
            w.writerow([k, *(repr(float(series[name][k])) for name in names)])
    return path


def _parse_series(raw: dict, buses, T, where):
    bus_ids = [b.id for b in buses]
    pos = {b: k for k, b in enumerate(bus_ids)}
    load_p = np.zeros((T, len(buses)))
    load_q = np.zeros((T, len(buses)))
    price = None
    mus = {}
    for key, values in raw.items():
        arr = values if isinstance(values, np.ndarray) else _array(values, f"{where}.{key}")
        if arr.shape != (T,):
            raise SchemaError(f"{where}: series {key!r} has {arr.size} entries, expected {T}")
        if key == "price":
            price = arr.astype(float)
            continue
        kind, sep, tail = key.partition(":")
        if not sep or kind not in ("load_p", "load_q", "mu"):
            raise SchemaError(f"{where}: unknown series {key!r}")
        if kind == "mu":
            if np.any(arr < 0) or np.any(arr > 1):
                raise UnitError(f"{where}: profile {tail!r} must lie in [0, 1]")
            mus[tail] = arr.astype(float)
            continue
        try:
            bus = int(tail)
        except ValueError:
            raise SchemaError(f"{where}: bad bus id in series {key!r}") from None
        if bus not in pos:
            raise SchemaError(f"{where}: series {key!r} refers to unknown bus")
        if kind == "load_p":
            if np.any(arr < 0):
                raise UnitError(f"{where}: negative load in {key!r}")
            load_p[:, pos[bus]] = arr
        else:
            load_q[:, pos[bus]] = arr
    if price is None:
        raise SchemaError(f"{where}: price series missing")
    return load_p, load_q, price, mus


def problem_from_dict(doc: dict, base_dir: Path | None = None) -> PlanningProblem:
    _check_keys(doc, _TOP, "case")
    name = doc.get("name", "")
    if not isinstance(name, str):
        raise SchemaError("case: name must be a string")
    base_mva = _num(doc, "base_mva", "case")
    base_kv = _num(doc, "base_kv", "case")
    if base_mva <= 0 or base_kv <= 0:
        raise UnitError("case: base_mva and base_kv must be positive")

    ec = doc["economics"]
    _check_keys(ec, _ECON, "economics")
    beta = _num(ec, "critical_ratio", "economics")
    if not 0 <= beta <= 1:
        raise UnitError(f"economics: critical_ratio must lie in [0, 1], got {beta}")
    horizon = _int(ec, "horizon_years", "economics")
    if horizon < 1:
        raise UnitError("economics: horizon_years must be at least 1")
    econ = Economics(
        discount_rate=_nonneg(_num(ec, "discount_rate", "economics"), "discount_rate", "economics"),
        voll=_nonneg(_num(ec, "voll", "economics"), "voll", "economics"),
        critical_ratio=beta,
        poi_limit=_nonneg(_num(ec, "poi_limit_mw", "economics"), "poi_limit_mw", "economics"),
        poi_q_limit=_nonneg(_num(ec, "poi_q_limit_mvar", "economics"), "poi_q_limit_mvar", "economics"),
        horizon_years=horizon,
        big_m=_nonneg(_num(ec, "big_m", "economics"), "big_m", "economics"),
    )

    raw_buses = doc["buses"]
    if not isinstance(raw_buses, list) or not raw_buses:
        raise SchemaError("buses: at least one bus is required")
    buses = []
    for k, rb in enumerate(raw_buses):
        where = f"buses[{k}]"
        _check_keys(rb, _BUS, where)
        poi = rb.get("poi", False)
        if not isinstance(poi, bool):
            raise SchemaError(f"{where}: poi must be a boolean")
        buses.append(Bus(_int(rb, "id", where), poi, _num(rb, "dv_min", where, -0.05),
                         _num(rb, "dv_max", where, 0.05)))

    raw_lines = doc["lines"]
    if not isinstance(raw_lines, list):
        raise SchemaError("lines: expected an array of tables")
    lines = []
    for k, rl in enumerate(raw_lines):
        where = f"lines[{k}]"
        _check_keys(rl, _LINE, where)
        status = rl.get("status", "existing")
        try:
            status = LineStatus(status)
        except ValueError:
            raise SchemaError(f"{where}: status must be 'existing' or 'candidate'") from None
        r = _nonneg(_num(rl, "r_ohm", where), "r_ohm", where)
        x = _num(rl, "x_ohm", where)
        try:
            lines.append(Line.from_ohms(
                _int(rl, "id", where), _int(rl, "from", where), _int(rl, "to", where), r, x,
                _nonneg(_num(rl, "p_limit_mw", where), "p_limit_mw", where),
                _nonneg(_num(rl, "q_limit_mvar", where), "q_limit_mvar", where),
                base_kv, base_mva, status,
                _nonneg(_num(rl, "annual_cost", where, 0.0), "annual_cost", where)))
        except ZeroImpedance as exc:
            raise UnitError(f"{where}: {exc}") from exc

    raw_ders = doc["ders"]
    if not isinstance(raw_ders, list):
        raise SchemaError("ders: expected an array of tables")
    ders = []
    for k, rd in enumerate(raw_ders):
        where = f"ders[{k}]"
        if not isinstance(rd, dict) or "kind" not in rd:
            raise SchemaError(f"{where}: kind is required")
        try:
            kind = DerKind(rd["kind"])
        except ValueError:
            raise SchemaError(f"{where}: unknown kind {rd['kind']!r}") from None
        _check_keys(rd, {**_DER_COMMON, **_DER_EXTRA[kind]}, where)
        cand = rd["buses"]
        if not isinstance(cand, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in cand):
            raise SchemaError(f"{where}: buses must be an array of integers")
        profile = rd.get("profile")
        if profile is not None and not isinstance(profile, str):
            raise SchemaError(f"{where}: profile must be a string")
        eff = _num(rd, "efficiency", where, 1.0)
        if kind is DerKind.STORAGE and not 0 < eff <= 1:
            raise UnitError(f"{where}: efficiency must lie in (0, 1]")
        ders.append(DerCandidate(
            id=_int(rd, "id", where), kind=kind, candidate_buses=tuple(cand),
            p_cap=_nonneg(_num(rd, "p_cap_mw", where), "p_cap_mw", where),
            annual_cost_power=_nonneg(_num(rd, "annual_cost_power", where), "annual_cost_power", where),
            gen_price=_nonneg(_num(rd, "gen_price", where, 0.0), "gen_price", where),
            e_cap=_nonneg(_num(rd, "e_cap_mwh", where, 0.0), "e_cap_mwh", where),
            annual_cost_energy=_nonneg(_num(rd, "annual_cost_energy", where, 0.0), "annual_cost_energy", where),
            efficiency=eff, profile_id=profile,
            q_ratio=_nonneg(_num(rd, "q_ratio", where, 0.6), "q_ratio", where),
            name=str(rd.get("name", "")),
        ))

    pr = doc["profiles"]
    _check_keys(pr, _PROFILES, "profiles")
    years = _array(pr["year"], "profiles.year", dtype=np.int64)
    T = years.size
    days = _array(pr["day"], "profiles.day", T, np.int64)
    hours = _array(pr["hour"], "profiles.hour", T, np.int64)
    weights = _array(pr["weight"], "profiles.weight", T)
    if np.any(weights < 0):
        raise UnitError("profiles: weights must be non-negative")
    periods = tuple(Period(int(y), int(d), int(h), float(w)) for y, d, h, w in zip(years, days, hours, weights))
    if ("csv" in pr) == ("series" in pr):
        raise SchemaError("profiles: give exactly one of csv or series")
    if "csv" in pr:
        if not isinstance(pr["csv"], str):
            raise SchemaError("profiles: csv must be a path string")
        csv_path = Path(pr["csv"])
        if not csv_path.is_absolute() and base_dir is not None:
            csv_path = base_dir / csv_path
        raw_series = read_profiles_csv(csv_path)
    else:
        if not isinstance(pr["series"], dict):
            raise SchemaError("profiles.series: expected a table")
        raw_series = pr["series"]
    load_p, load_q, price, mus = _parse_series(raw_series, buses, T, "profiles")
    ts = TimeSeriesBundle(periods, load_p, load_q, price, mus)

    raw_sc = doc["scenarios"]
    if not isinstance(raw_sc, list) or not raw_sc:
        raise SchemaError("scenarios: at least one scenario is required")
    scen = []
    for k, rs in enumerate(raw_sc):
        where = f"scenarios[{k}]"
        _check_keys(rs, _SCEN, where)
        prob = _num(rs, "probability", where)
        if prob < 0:
            raise UnitError(f"{where}: probability must be non-negative")
        u = _array(rs["u"], f"{where}.u", T, np.int64) if "u" in rs else np.ones(T, dtype=np.int64)
        scen.append(Scenario(_int(rs, "id", where), prob, u))

    return PlanningProblem(tuple(buses), tuple(lines), tuple(ders), ts, ScenarioSet(tuple(scen)), econ,
                           base_mva, base_kv, name)


def loads_problem(text: str, base_dir: Path | None = None) -> PlanningProblem:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"malformed case file: {exc}") from exc
    return problem_from_dict(doc, base_dir)


def load_problem(document) -> PlanningProblem:
    """Parse a case file (path, or raw bytes/str of a document).

    Raises :class:`ParseError`, :class:`SchemaError` or :class:`UnitError`.
    """
    if isinstance(document, (bytes, bytearray)):
        return loads_problem(document.decode("utf-8"))
    path = Path(document)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read case file {path}: {exc}") from exc
    return loads_problem(text, path.parent)


def _series_dict(problem: PlanningProblem) -> dict[str, np.ndarray]:
    ts = problem.timeseries
    series = {"price": ts.price}
    for k, b in enumerate(problem.buses):
        series[f"load_p:{b.id}"] = ts.load_p[:, k]
        series[f"load_q:{b.id}"] = ts.load_q[:, k]
    for key, v in ts.gen_profiles.items():
        series[f"mu:{key}"] = v
    return series


def problem_to_dict(problem: PlanningProblem, csv_name: str | None = None) -> dict:
    e = problem.economics
    econ = {"discount_rate": e.discount_rate, "voll": e.voll, "critical_ratio": e.critical_ratio,
            "poi_limit_mw": e.poi_limit, "horizon_years": e.horizon_years}
    if e.poi_q_limit is not None:
        econ["poi_q_limit_mvar"] = e.poi_q_limit
    if e.big_m is not None:
        econ["big_m"] = e.big_m
    ders = []
    for d in problem.der_candidates:
        rec = {"id": d.id, "kind": d.kind.value, "buses": list(d.candidate_buses), "p_cap_mw": d.p_cap,
               "annual_cost_power": d.annual_cost_power, "q_ratio": d.q_ratio}
        if d.name:
            rec["name"] = d.name
        if d.kind is DerKind.DISPATCHABLE:
            rec["gen_price"] = d.gen_price
        elif d.kind is DerKind.NONDISPATCHABLE:
            rec["profile"] = d.profile_id
        else:
            rec.update(e_cap_mwh=d.e_cap, annual_cost_energy=d.annual_cost_energy, efficiency=d.efficiency)
        ders.append(rec)
    ts = problem.timeseries
    profiles = {
        "year": [p.year for p in ts.periods], "day": [p.day for p in ts.periods],
        "hour": [p.hour for p in ts.periods], "weight": [p.weight for p in ts.periods],
    }
    if csv_name is None:
        profiles["series"] = {k: [float(v) for v in arr] for k, arr in _series_dict(problem).items()}
    else:
        profiles["csv"] = csv_name
    doc = {}
    if problem.name:
        doc["name"] = problem.name
    doc.update({
        "base_mva": problem.base_mva, "base_kv": problem.base_kv, "economics": econ,
        "buses": [{"id": b.id, "poi": b.is_poi, "dv_min": b.dv_min, "dv_max": b.dv_max} for b in problem.buses],
        "lines": [{"id": l.id, "from": l.from_bus, "to": l.to_bus, "r_ohm": l.r_ohm, "x_ohm": l.x_ohm,
                   "p_limit_mw": l.p_limit_mw, "q_limit_mvar": l.q_limit_mvar, "status": l.status.value,
                   "annual_cost": l.annual_cost} for l in problem.lines],
        "ders": ders,
        "profiles": profiles,
        "scenarios": [{"id": s.id, "probability": s.probability, "u": [int(v) for v in s.u]}
                      for s in problem.scenarios.scenarios],
    })
    return doc


def dumps_problem(problem: PlanningProblem) -> str:
    """Serialise with inline profiles; ``loads_problem(dumps_problem(p)) == p``."""
    return tomli_w.dumps(problem_to_dict(problem))


def save_problem(problem: PlanningProblem, path, profiles_csv: bool = False) -> Path:
    path = Path(path)
    if profiles_csv:
        csv_path = path.with_suffix(".profiles.csv")
        write_profiles_csv(csv_path, _series_dict(problem))
        text = tomli_w.dumps(problem_to_dict(problem, csv_name=csv_path.name))
    else:
        text = dumps_problem(problem)
    path.write_text(text, encoding="utf-8")
    return path
