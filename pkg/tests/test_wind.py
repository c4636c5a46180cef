import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vremix.errors import ConfigError, DomainError, ValidationError
from vremix.ingest import GridSeries, Sampling, Variable
from vremix.intraday import IntradaySampler, WeibullCopulaParams
from vremix.wind import (
    RHO0,
    PowerCurve,
    air_density,
    density_corrected_speed,
    extrapolate_hub_height,
    hourly_wind_power,
    load_power_curve,
    turbine_power,
)


@pytest.fixture(scope="module")
def curve():
    return load_power_curve()


def hourly(values, variable=Variable.WIND_SPEED_10M):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    times = np.datetime64("2010-01-01T00") + np.arange(values.shape[0])
    ids = [f"g{i}" for i in range(values.shape[1])]
    return GridSeries(variable, Sampling.HOURLY, times, ids, values)


def test_extrapolation_examples():
    assert extrapolate_hub_height(5.0, 10.0, 10.0) == 5.0
    assert extrapolate_hub_height(0.0, 10.0, 101.0) == 0.0
    assert extrapolate_hub_height(6.0, 10.0, 101.0, 1 / 7) == pytest.approx(6 * 10.1 ** (1 / 7), rel=1e-14)
    # independent evaluation: 6 * exp(log(10.1) / 7)
    assert extrapolate_hub_height(6.0, 10.0, 101.0) == pytest.approx(8.348832, abs=1e-6)


def test_extrapolation_rejects_bad_height():
    with pytest.raises(DomainError):
        extrapolate_hub_height(5.0, 0.0, 100.0)


def test_air_density_standard_atmosphere():
    assert air_density(288.15, 101325.0) == pytest.approx(1.2250, abs=5e-5)


def test_air_density_humidity_and_linearity():
    assert air_density(288.15, 101325.0, 0.01) < air_density(288.15, 101325.0, 0.0)
    assert air_density(280.0, 2e5, 0.005) == pytest.approx(2 * air_density(280.0, 1e5, 0.005), rel=1e-15)


def test_air_density_domain():
    with pytest.raises(DomainError):
        air_density(280.0, 1e5, 0.1)
    with pytest.raises(DomainError):
        air_density(0.0, 1e5)


def test_density_correction_examples():
    assert density_corrected_speed(7.0, RHO0, RHO0) == 7.0
    assert density_corrected_speed(7.0, 8 * RHO0, RHO0) == pytest.approx(14.0, rel=1e-15)
    assert density_corrected_speed(10.0, 0.9, 1.0) == pytest.approx(9.655, abs=5e-4)
    with pytest.raises(DomainError):
        density_corrected_speed(7.0, 0.0)


def test_turbine_power_examples(curve):
    assert turbine_power(curve.cut_in - 0.1, curve) == 0.0
    i = len(curve.speeds) // 2
    assert turbine_power(curve.speeds[i], curve) == curve.powers[i]
    assert turbine_power(curve.cut_out, curve) == 0.0
    assert turbine_power(30.0, curve) == 0.0


def test_bundled_curve_metadata(curve):
    assert curve.nominal_power == 2.3e6
    assert (curve.cut_in, curve.cut_out) == (3.0, 25.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 40), st.floats(0, 40))
def test_turbine_power_bounded_and_monotone_below_rated(a, b):
    c = load_power_curve()
    p = turbine_power(np.array([a, b]), c)
    assert np.all((p >= 0) & (p <= c.nominal_power))
    lo, hi = sorted((a, b))
    rated = c.speeds[np.argmax(c.powers)]
    if c.cut_in <= lo and hi <= rated:
        assert turbine_power(lo, c) <= turbine_power(hi, c)


def test_power_curve_validation():
    with pytest.raises(ValidationError):
        PowerCurve(np.array([3.0, 2.0]), np.array([0.0, 1.0]), 1.0, 1.0, 5.0)
    with pytest.raises(ValidationError):
        PowerCurve(np.array([1.0, 2.0]), np.array([0.0, 2.0]), 1.0, 1.0, 5.0)


def test_missing_curve_file(tmp_path):
    with pytest.raises(ConfigError):
        load_power_curve(tmp_path / "missing.csv")


def test_hourly_zero_wind_gives_zero_power(curve):
    out = hourly_wind_power(hourly(np.zeros((24, 2))), curve)
    assert np.all(out.values == 0.0)


def test_hourly_rated_wind_gives_nominal(curve):
    rated_10m = 15.0 / 10.1 ** (1 / 7)
    out = hourly_wind_power(hourly(np.full((24, 1), rated_10m)), curve)
    np.testing.assert_array_equal(out.values, curve.nominal_power)


def test_hourly_chain_is_pointwise_without_density(curve):
    rng = np.random.default_rng(0)
    v = rng.uniform(0, 20, (48, 3))
    out = hourly_wind_power(hourly(v), curve)
    np.testing.assert_array_equal(out.values, turbine_power(extrapolate_hub_height(v, 10, 101), curve))


def test_hourly_input_logs_bypass(curve, caplog):
    with caplog.at_level("INFO"):
        hourly_wind_power(hourly(np.ones((24, 1))), curve)
    assert "intraday sampler bypassed" in caplog.text


def test_daily_input_requires_sampler(curve):
    daily = GridSeries(Variable.WIND_SPEED_10M, Sampling.DAILY, [np.datetime64("2010-01-01")], ["g0"], [[5.0]])
    with pytest.raises(ConfigError):
        hourly_wind_power(daily, curve)


def test_daily_input_uses_one_density_per_day(curve):
    day = np.datetime64("2010-01-01")
    mk = lambda var, v: GridSeries(var, Sampling.DAILY, [day], ["g0"], [[v]])
    params = WeibullCopulaParams(("g0",), np.array([2.0]), np.eye(1))
    sampler = IntradaySampler(params, seed=3)
    speed = mk(Variable.WIND_SPEED_10M, 6.0)
    plain = hourly_wind_power(speed, curve, sampler=sampler)
    dense = hourly_wind_power(speed, curve, sampler=sampler,
                              temperature=mk(Variable.TEMPERATURE_2M, 250.0),
                              pressure=mk(Variable.SURFACE_PRESSURE, 101325.0))
    hub = sampler.sample(extrapolate_hub_height(np.array([[6.0]]), 10, 101), np.array([day]))
    rho = air_density(250.0, 101325.0)
    np.testing.assert_array_equal(plain.values[:, 0], turbine_power(hub[0, :, 0], curve))
    np.testing.assert_allclose(dense.values[:, 0],
                               turbine_power(density_corrected_speed(hub[0, :, 0], rho), curve), rtol=1e-15)


def test_sampled_daily_mean_tracks_target():
    n = 10_000
    params = WeibullCopulaParams(("g0",), np.array([2.0]), np.eye(1))
    days = np.datetime64("2000-01-01") + np.arange(n)
    v = IntradaySampler(params, seed=7).sample(np.full((n, 1), 8.0), days)
    assert abs(v.mean() - 8.0) < 0.08
