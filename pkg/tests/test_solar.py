import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vremix.errors import ConfigError, DomainError
from vremix.ingest import GridPoint, GridSeries, Sampling, Variable
from vremix.solar import (
    SOLAR_CONSTANT,
    PvConstants,
    cell_temperature,
    clearness_index,
    daily_extraterrestrial,
    declination,
    diffuse_fraction,
    eccentricity_factor,
    equation_of_time,
    extraterrestrial_hourly,
    hourly_pv_power,
    hourly_surface_irradiance,
    pv_power,
    solar_position,
    split_irradiance,
    tilted_irradiance,
)

DATA = Path(__file__).parent / "data"
EQUINOX = np.datetime64("2010-03-22")  # day 81: declination formula gives exactly 0


def noon_longitude(day, hour):
    """Longitude whose solar time at ``hour:30`` UTC is exactly 12:00."""
    n = (day - day.astype("datetime64[Y]")).astype(int) + 1
    return 15 * (12 - hour - 0.5 - float(equation_of_time(n)) / 60)


def test_pv_constants_defaults():
    c = PvConstants()
    assert c.eta_ref == pytest.approx(0.1493, abs=5e-5)
    assert c.noct - c.t_ref == pytest.approx(21.0)


def test_pv_constants_from_mapping():
    assert PvConstants.from_mapping({"albedo": "0.3"}).albedo == 0.3
    with pytest.raises(ConfigError):
        PvConstants.from_mapping({"albedo": "x"})
    with pytest.raises(ConfigError):
        PvConstants(eta_ref=1.5)


def test_extraterrestrial_midnight_is_zero():
    assert extraterrestrial_hourly("2010-06-21", 0, 45.0, 0.0) == 0.0


def test_extraterrestrial_equator_equinox_noon():
    lon = noon_longitude(EQUINOX, 11)
    value = extraterrestrial_hourly(EQUINOX, 11, 0.0, lon)
    assert value == pytest.approx(SOLAR_CONSTANT * float(eccentricity_factor(81)), rel=1e-12)


@pytest.mark.parametrize("lat", [0.0, 30.0, 45.0, 60.0])
@pytest.mark.parametrize("day", ["2010-01-15", "2010-03-22", "2010-06-21", "2010-10-10"])
def test_daily_mean_matches_closed_form(lat, day):
    d = np.array([np.datetime64(day)])
    _, mean = daily_extraterrestrial(d, [lat], [0.0])
    n = int((d - d.astype("datetime64[Y]")).astype(int)[0]) + 1
    phi, delta = math.radians(lat), float(declination(n))
    ws = math.acos(max(-1.0, min(1.0, -math.tan(phi) * math.tan(delta))))
    h0 = SOLAR_CONSTANT * float(eccentricity_factor(n)) / math.pi * (
        math.cos(phi) * math.cos(delta) * math.sin(ws) + ws * math.sin(phi) * math.sin(delta))
    assert mean[0, 0] == pytest.approx(h0, rel=0.01)


def test_clearness_index_examples():
    assert clearness_index(300.0, 300.0) == 1.0
    assert clearness_index(0.0, 300.0) == 0.0
    assert clearness_index(150.0, 300.0) == 0.5
    assert clearness_index(10.0, 0.0) == 0.0
    assert clearness_index(320.0, 300.0) == 1.0
    with pytest.raises(DomainError):
        clearness_index(-1.0, 300.0)


def test_hourly_surface_irradiance_examples():
    i0 = np.array([0.0, 200.0, 800.0, 1100.0, 500.0])
    assert np.all(hourly_surface_irradiance(0.0, i0) == 0.0)
    np.testing.assert_array_equal(hourly_surface_irradiance(1.0, i0), i0)


def test_diffuse_fraction_overcast_limit():
    assert diffuse_fraction(0.0, 0.5) == 1.0


def test_diffuse_fraction_clear_low_sun():
    # evaluated from the high-k_T branch 0.486 k_T - 0.182 sin(alpha)
    assert diffuse_fraction(0.9, math.sin(math.radians(5))) == pytest.approx(0.42153765, abs=1e-8)


def test_diffuse_fraction_high_branch_floor():
    assert diffuse_fraction(0.8, 1.0) == pytest.approx(0.2068, abs=1e-12)
    assert diffuse_fraction(0.78, 1.0) >= 0.1


def test_diffuse_fraction_discontinuity_at_low_break():
    s = 0.5
    jump = diffuse_fraction(0.3 + 1e-9, s) - diffuse_fraction(0.3 - 1e-9, s)
    assert jump == pytest.approx(0.01385, abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(-1, 1))
def test_diffuse_fraction_in_unit_interval(kt, s):
    assert 0.0 <= diffuse_fraction(kt, s) <= 1.0


def test_tilted_flat_plate_identity():
    t = np.array([EQUINOX.astype("datetime64[h]") + 11])
    pos = solar_position(t, [40.0], [noon_longitude(EQUINOX, 11)], tilt=0.0)
    i = np.array([[700.0]])
    i_d, i_b = split_irradiance(i, 0.6, pos.cos_zenith)
    out = tilted_irradiance(i, i_d, i_b, pos, np.array([[1100.0]]))
    assert out.reflected[0, 0] == 0.0
    assert out.total[0, 0] == pytest.approx(700.0, rel=1e-14)


def test_tilted_night_is_zero():
    t = np.array([np.datetime64("2010-06-21T00")])
    pos = solar_position(t, [45.0], [0.0])
    out = tilted_irradiance(np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1, 1)), pos, np.zeros((1, 1)))
    assert out.total[0, 0] == 0.0


def test_tilted_direct_at_latitude_tilt_equinox_noon():
    t = np.array([EQUINOX.astype("datetime64[h]") + 11])
    pos = solar_position(t, [40.0], [noon_longitude(EQUINOX, 11)])
    assert pos.cos_incidence[0, 0] == pytest.approx(1.0, abs=1e-12)
    out = tilted_irradiance(np.array([[500.0]]), np.array([[100.0]]), np.array([[400.0]]), pos, np.array([[1000.0]]))
    assert out.direct[0, 0] == pytest.approx(400.0 / math.cos(math.radians(40.0)), rel=1e-10)


def test_tilted_rejects_inconsistent_components():
    t = np.array([EQUINOX.astype("datetime64[h]") + 11])
    pos = solar_position(t, [40.0], [0.0])
    with pytest.raises(DomainError):
        tilted_irradiance(np.array([[500.0]]), np.array([[100.0]]), np.array([[300.0]]), pos, np.array([[1000.0]]))


def test_cell_temperature_examples():
    assert cell_temperature(290.0, 3.0, 0.0) == 290.0
    assert cell_temperature(290.0, 5.0, 600.0) < cell_temperature(290.0, 2.0, 600.0)
    # 293.15 + 26 * (1 - (250 / 1.675 / 1000) / 0.9)
    assert cell_temperature(293.15, 1.0, 800.0) == pytest.approx(314.83822554, abs=1e-8)


def test_pv_power_examples():
    c = PvConstants()
    assert pv_power(0.0, 300.0) == 0.0
    assert pv_power(1000.0, c.t_ref) == pytest.approx(215.0, rel=1e-12)
    assert pv_power(1000.0, c.t_ref + 25) == pytest.approx(0.9 * 215.0, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1400), st.floats(230, 360), st.floats(0, 30))
def test_pv_power_bounded_and_nonincreasing_in_temperature(g, t, dt):
    p1, p2 = pv_power(g, t), pv_power(g, t + dt)
    assert 0 <= p2 <= p1 <= PvConstants().nominal_power


def daily(variable, days, values):
    return GridSeries(variable, Sampling.DAILY, days, ["p"], np.asarray(values, dtype=float)[:, None])


def run_chain(lat, lon, days, kt, t_air=288.0, wind=3.0):
    days = np.asarray(days, dtype="datetime64[D]")
    _, i0_mean = daily_extraterrestrial(days, [lat], [lon])
    irr = daily(Variable.SURFACE_IRRADIANCE, days, np.asarray(kt) * i0_mean[:, 0])
    temp = daily(Variable.TEMPERATURE_2M, days, np.full(days.size, t_air))
    w = daily(Variable.WIND_SPEED_10M, days, np.full(days.size, wind))
    return hourly_pv_power(irr, temp, w, [GridPoint("p", lat, lon, "Z")])


def test_polar_night_gridpoint_is_zero():
    days = np.datetime64("2010-12-20") + np.arange(3)
    out = run_chain(80.0, 10.0, days, [0.5, 0.5, 0.5])
    assert np.all(out.values == 0.0)


def test_clear_sky_june_midday_positive():
    out = run_chain(45.0, 0.0, [np.datetime64("2010-06-21")], [1.0])
    assert np.all(out.values[10:14, 0] > 0)


def test_conservation_identities_along_chain():
    days = np.datetime64("2010-01-01") + np.arange(365)
    lat, lon = np.array([38.0, 46.0]), np.array([13.0, 9.0])
    i0, i0_mean = daily_extraterrestrial(days, lat, lon)
    kt = np.random.default_rng(1).uniform(0.1, 0.8, (days.size, 2))
    i = hourly_surface_irradiance(kt[:, None, :], i0)
    np.testing.assert_allclose(i.mean(axis=1), kt * i0_mean, rtol=1e-13, atol=1e-12)
    hours = (days[:, None].astype("datetime64[h]") + np.arange(24)).ravel()
    pos = solar_position(hours, lat, lon)
    i = i.reshape(-1, 2)
    i_d, i_b = split_irradiance(i, np.repeat(kt, 24, axis=0), pos.cos_zenith)
    np.testing.assert_allclose(i_d + i_b, i, rtol=1e-15, atol=0)
    assert np.all(i_d >= 0) and np.all(i_b >= 0)


def golden_inputs():
    days = np.datetime64("2010-03-15") + np.arange(10)
    rng = np.random.default_rng(20100315)
    kt = rng.uniform(0.2, 0.75, days.size)
    t_air = 283.0 + rng.normal(0, 2, days.size)
    wind = rng.gamma(4.0, 0.8, days.size)
    return days, kt, t_air, wind


def golden_series():
    days, kt, t_air, wind = golden_inputs()
    _, i0_mean = daily_extraterrestrial(days, [44.5], [11.3])
    irr = daily(Variable.SURFACE_IRRADIANCE, days, kt * i0_mean[:, 0])
    out = hourly_pv_power(irr, daily(Variable.TEMPERATURE_2M, days, t_air),
                          daily(Variable.WIND_SPEED_10M, days, wind), [GridPoint("p", 44.5, 11.3, "Z")])
    return out.values[:, 0]


def test_one_gridpoint_golden_fixture():
    with open(DATA / "pv_golden.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["hour", "power_w"]
    expected = np.array([float(r[1]) for r in rows[1:]])
    np.testing.assert_allclose(golden_series(), expected, rtol=1e-12, atol=1e-9)
