import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from microplan.errors import ParseError, SchemaError, UnitError, ZeroImpedance
from microplan.grid_model import (DerKind, builtin_case33, dumps_problem, load_problem, loads_problem,
                                  per_unitize, present_worth, random_toy, save_problem, toy4, validate)
from microplan.grid_model.io import read_profiles_csv, write_profiles_csv


def test_per_unitize_pure_resistance():
    assert per_unitize(1.0, 0.0, 1.0, 1.0) == (1.0, 0.0)


def test_per_unitize_pure_reactance():
    assert per_unitize(0.0, 1.0, 1.0, 1.0) == (0.0, -1.0)


def test_per_unitize_uses_base_impedance():
    # z_base = 12.66^2 / 10 = 16.02756 ohm
    g, b = per_unitize(16.02756, 0.0, 12.66, 10.0)
    assert g == pytest.approx(1.0)
    assert b == 0.0


def test_zero_impedance_rejected():
    with pytest.raises(ZeroImpedance):
        per_unitize(0.0, 0.0, 12.66, 10.0)


def test_present_worth():
    assert present_worth(0.05, 1) == 1.0
    assert present_worth(0.05, 2) == pytest.approx(1 / 1.05)
    with pytest.raises(ValueError):
        present_worth(0.05, 0)


def test_builtin33_topology(base33):
    p = base33
    assert len(p.buses) == 33
    assert sum(not l.is_candidate for l in p.lines) == 32
    assert [l.id for l in p.candidate_lines] == list(range(33, 44))
    assert p.poi_bus.id == 1
    assert validate(p) == []


def test_builtin33_candidate_data(base33):
    ders = {d.id: d for d in base33.der_candidates}
    assert [ders[i].candidate_buses[0] for i in range(1, 7)] == [17, 21, 32, 24, 15, 15]
    assert ders[3].annual_cost_power == 70_000.0
    assert ders[3].gen_price == 70.0
    assert ders[7].kind is DerKind.STORAGE and ders[7].candidate_buses == (15,)
    assert ders[7].efficiency == 0.95 and ders[7].e_cap == 6.0
    line39 = next(l for l in base33.lines if l.id == 39)
    assert (line39.from_bus, line39.to_bus, line39.annual_cost) == (20, 21, 4423.0)
    assert line39.p_limit_mw == pytest.approx(0.21)


def test_builtin33_peak_and_weights(base33):
    ts = base33.timeseries
    assert ts.peak_demand == pytest.approx(2.7)
    assert ts.num_periods == 48
    assert ts.weights.sum() / 24 == pytest.approx(365.0)
    for mu in ts.gen_profiles.values():
        assert mu.min() >= 0 and mu.max() <= 1


def test_builtin33_profiles_depend_on_seed():
    a = builtin_case33(profile_seed=1).timeseries.gen_profiles["wind"]
    b = builtin_case33(profile_seed=2).timeseries.gen_profiles["wind"]
    c = builtin_case33(profile_seed=1).timeseries.gen_profiles["wind"]
    assert not np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_year_multipliers_single_year(base33):
    mult = base33.year_multipliers()
    assert list(mult) == [1]
    assert mult[1] == pytest.approx(sum(present_worth(0.05, t) for t in range(1, 21)))


def test_toml_round_trip_builtin(base33):
    text = dumps_problem(base33)
    assert loads_problem(text) == base33


def test_toml_round_trip_with_csv(tmp_path):
    p = toy4()
    path = save_problem(p, tmp_path / "toy.toml", profiles_csv=True)
    assert (tmp_path / "toy.csv").exists() or any(f.suffix == ".csv" for f in tmp_path.iterdir())
    assert load_problem(path) == p


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_toml_round_trip_random(seed):
    p = random_toy(seed)
    assert validate(p) == []
    assert loads_problem(dumps_problem(p)) == p


def test_profiles_csv_round_trip(tmp_path):
    series = {"price": np.array([30.0, 45.5]), "load_p:2": np.array([0.1, 0.2])}
    path = write_profiles_csv(tmp_path / "p.csv", series)
    back = read_profiles_csv(path)
    assert list(back) == list(series)
    for k in series:
        assert np.array_equal(back[k], series[k])


def test_unknown_key_is_schema_error():
    text = dumps_problem(toy4()) + "\nsurprise = 1\n"
    with pytest.raises(SchemaError):
        loads_problem(text)


def test_negative_capacity_is_unit_error():
    text = dumps_problem(toy4()).replace("p_cap_mw = 1.0", "p_cap_mw = -1.0", 1)
    assert "p_cap_mw = -1.0" in text
    with pytest.raises(UnitError):
        loads_problem(text)


def test_broken_toml_is_parse_error():
    with pytest.raises(ParseError):
        loads_problem("base_mva = = 3")


def test_validate_flags_poi_count():
    p = toy4()
    buses = tuple(dataclasses.replace(b, is_poi=False) for b in p.buses)
    codes = {v.code for v in validate(dataclasses.replace(p, buses=buses))}
    assert "poi_count" in codes


def test_validate_flags_critical_capacity():
    p = toy4(critical_ratio=1.0)
    ders = tuple(dataclasses.replace(d, p_cap=0.01) if d.kind is DerKind.DISPATCHABLE else d
                 for d in p.der_candidates)
    codes = {v.code for v in validate(dataclasses.replace(p, der_candidates=ders))}
    assert codes == {"critical_capacity"}


def test_validate_flags_day_weights():
    p = toy4()
    ts = p.timeseries
    periods = tuple(dataclasses.replace(per, weight=300.0) for per in ts.periods)
    bad = dataclasses.replace(p, timeseries=dataclasses.replace(ts, periods=periods))
    assert "year_weight" in {v.code for v in validate(bad)}


def test_scaled_variants(base33):
    s = base33.scaled(load=2.0, price=0.5)
    assert s.peak_demand == pytest.approx(5.4)
    assert np.allclose(s.timeseries.price, base33.timeseries.price * 0.5)
    assert base33.without_candidate_lines().candidate_lines == ()
    assert all(b.dv_max == 0.1 for b in base33.with_dv_bounds(0.1).buses)
