import datetime as dt

import numpy as np
import pytest
from helpers import COEF, cycles, synthetic_demand
from sklearn.linear_model import BayesianRidge

from vremix.core import DAY_TYPES, DayType, HourlySeries, day_types
from vremix.demand import (
    DemandModelParams,
    PredictMode,
    ZoneTemperatures,
    bayesian_ridge,
    composite_cycles,
    cv_score,
    design_matrix,
    fit,
    predict,
    r2_score,
    read_params,
    threshold_pairs,
    write_params,
    write_report,
)
from vremix.errors import ConfigError, FitError, RangeError

SMALL_HEAT = (9.0, 9.5, 10.0)
SMALL_COOL = (12.5, 13.0, 13.5)


def hourly(first, values):
    return HourlySeries(np.datetime64(first, "h"), np.asarray(values, dtype=float))


def test_flat_demand_gives_unit_cycles():
    cyc = composite_cycles(hourly("2010-01-04T00", np.full(24 * 14, 500.0)))
    for d in DAY_TYPES:
        np.testing.assert_array_equal(cyc[d], np.ones(24))


def test_sinusoid_is_recovered_as_normalized_shape():
    shape = 1000 + 200 * np.sin(2 * np.pi * np.arange(24) / 24)
    cyc = composite_cycles(hourly("2010-01-04T00", np.tile(shape, 14)))
    np.testing.assert_allclose(cyc[DayType.WORK], shape / shape.mean(), rtol=1e-12)


def test_known_cycles_recovered_per_day_type():
    g = cycles()
    dates = np.datetime64("2010-01-04") + np.arange(28)
    kinds = day_types(dates)
    levels = np.linspace(900, 1100, dates.size)
    values = np.concatenate([lv * g[DAY_TYPES.index(k)] for lv, k in zip(levels, kinds)])
    cyc = composite_cycles(hourly("2010-01-04T00", values))
    for b, d in enumerate(DAY_TYPES):
        np.testing.assert_allclose(cyc[d], g[b], rtol=1e-12)


def test_missing_day_type_is_named():
    with pytest.raises(FitError, match="sat"):
        composite_cycles(hourly("2010-01-04T00", np.ones(24 * 3)))


def test_design_matrix_examples():
    kinds = [DayType.WORK, DayType.WORK, DayType.SAT]
    x = design_matrix(np.array([11.0, 9.5, 7.5]), kinds, 9.5, 13.0)
    np.testing.assert_array_equal(x[0], [0, 0, 1, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(x[1], [0, 0, 1, 0, 0, 0, 0, 0, 0])
    np.testing.assert_array_equal(x[2], [0, 0, 0, 2, 0, 1, 0, 0, 0])
    x = design_matrix(np.array([16.0]), [DayType.OFF], 9.5, 13.0)
    np.testing.assert_array_equal(x[0], [0, 0, 0, 0, 0, 0, 0, 3, 1])


def test_bayesian_ridge_matches_sklearn():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(400, 9))
    y = x @ rng.normal(size=9) * 10 + rng.normal(0, 3, 400)
    ours = bayesian_ridge(x, y)
    ref = BayesianRidge(fit_intercept=False, tol=1e-8, max_iter=300).fit(x, y)
    np.testing.assert_allclose(ours.coef, ref.coef_, rtol=1e-8)
    assert ours.alpha == pytest.approx(ref.alpha_, rel=1e-6)
    assert ours.lam == pytest.approx(ref.lambda_, rel=1e-6)


def test_r2_and_cv_score():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(4, 2.5)) == 0.0
    x = np.column_stack([np.ones(60), np.arange(60.0)])
    assert cv_score(x, 3 + 2 * x[:, 1], 3) == pytest.approx(1.0, abs=1e-9)


def test_threshold_pairs_respect_order_and_empty_grid():
    assert threshold_pairs([9, 14], [10, 13]) == ((9.0, 10.0), (9.0, 13.0))
    with pytest.raises(ConfigError):
        threshold_pairs([15.0], [10.0])


def test_fit_recovers_noiseless_model():
    temps, dem = synthetic_demand(3, 0.0)
    params, report = fit(dem, temps, cv_blocks=3)
    assert report.chosen == (9.5, 13.0)
    assert (params.t_heat, params.t_cool) == (9.5, 13.0)
    np.testing.assert_allclose(params.coefficients[0], COEF, rtol=1e-6)
    np.testing.assert_allclose(params.cycles[0], cycles(), rtol=1e-9)
    assert report.r2["Z"] == pytest.approx(1.0, abs=1e-9)
    assert report.cv_scores.shape == (len(report.grid), 1)


def test_fit_dead_zone_slopes_shrink():
    dates = np.datetime64("2001-01-01") + np.arange(3 * 365)
    rng = np.random.default_rng(4)
    t = rng.uniform(10.0, 12.5, dates.size)
    kinds = day_types(dates)
    level = design_matrix(t, kinds, 9.5, 13.0) @ COEF + rng.normal(0, 50, dates.size)
    block = np.array([DAY_TYPES.index(k) for k in kinds])
    dem = {"Z": hourly("2001-01-01T00", (level[:, None] * cycles()[block]).ravel())}
    params, _ = fit(dem, ZoneTemperatures(dates, ("Z",), t[:, None]), heat_grid=[9.5], cool_grid=[13.0], cv_blocks=3)
    c = params.coefficients[0]
    assert np.all(np.abs(c[[0, 1, 3, 4, 6, 7]]) < 1e-3)
    for b in range(3):
        assert c[3 * b + 2] == pytest.approx(level[block == b].mean(), rel=1e-3)


def test_fit_needs_enough_overlap():
    temps, dem = synthetic_demand(2, 0.0)
    with pytest.raises(FitError):
        fit(dem, temps, heat_grid=SMALL_HEAT, cool_grid=SMALL_COOL, cv_blocks=3)
    with pytest.raises(ConfigError):
        fit(dem, temps, cv_blocks=1)


def test_fit_ties_pick_first_pair():
    temps, dem = synthetic_demand(3, 0.0)
    _, report = fit(dem, temps, heat_grid=[9.5, 9.5], cool_grid=[13.0], cv_blocks=3)
    assert report.chosen == (9.5, 13.0)


@pytest.fixture(scope="module")
def fitted():
    temps, dem = synthetic_demand(3, 0.01, seed=2)
    params, report = fit(dem, temps, heat_grid=SMALL_HEAT, cool_grid=SMALL_COOL, cv_blocks=3)
    return params, report, temps, dem


def test_predict_dead_zone_closed_form(fitted):
    params = fitted[0]
    temps = ZoneTemperatures([np.datetime64("2010-01-04")], ("Z",), [[11.0]])
    out = predict(params, temps)["Z"]
    np.testing.assert_allclose(out.values, params.coefficients[0, 2] * params.cycles[0, 0], rtol=1e-15)


def test_predict_daily_mean_equals_level(fitted):
    params, _, temps, _ = fitted
    out = predict(params, temps)["Z"]
    level = params.daily_level("Z", temps.zone("Z"), day_types(temps.dates))
    np.testing.assert_allclose(out.values.reshape(-1, 24).mean(axis=1), level, rtol=1e-12)


def test_predict_daily_mode_is_flat(fitted):
    params, _, temps, _ = fitted
    out = predict(params, temps, mode=PredictMode.DAILY)["Z"].values.reshape(-1, 24)
    assert np.all(out == out[:, :1])


def test_sampled_with_zero_noise_equals_deterministic(fitted):
    params, _, temps, _ = fitted
    quiet = DemandModelParams(params.zones, params.t_heat, params.t_cool, params.coefficients,
                              params.cycles, [0.0], params.floor, params.noise_precision,
                              params.weight_precision)
    a = predict(quiet, temps, mode="sampled", seed=3)["Z"].values
    b = predict(quiet, temps, mode="deterministic")["Z"].values
    np.testing.assert_array_equal(a, b)


def test_sampled_is_deterministic_given_seed(fitted):
    params, _, temps, _ = fitted
    a = predict(params, temps, mode="sampled", seed=11)["Z"].values
    b = predict(params, temps, mode="sampled", seed=11)["Z"].values
    c = predict(params, temps, mode="sampled", seed=12)["Z"].values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    resid = a - predict(params, temps)["Z"].values
    assert resid.std() == pytest.approx(params.noise_std[0], rel=0.05)


def test_predict_floor(fitted):
    params = fitted[0]
    loud = DemandModelParams(params.zones, params.t_heat, params.t_cool, params.coefficients,
                             params.cycles, [1e6], params.floor, params.noise_precision,
                             params.weight_precision)
    temps = ZoneTemperatures(np.datetime64("2010-01-04") + np.arange(5), ("Z",), np.full((5, 1), 11.0))
    out = predict(loud, temps, mode="sampled", seed=0)["Z"].values
    assert out.min() == params.floor[0] > 0


def test_predict_outside_record(fitted):
    params, _, temps, _ = fitted
    with pytest.raises(RangeError):
        predict(params, temps, first="1990-01-01", last="1990-12-31")


def test_level_is_continuous_at_thresholds(fitted):
    params = fitted[0]
    for t0 in (params.t_heat, params.t_cool):
        lv = params.daily_level("Z", np.array([t0 - 1e-9, t0, t0 + 1e-9]), [DayType.WORK] * 3)
        assert np.ptp(lv) < 1e-5


def test_params_roundtrip(fitted, tmp_path):
    params, report = fitted[:2]
    write_params(params, tmp_path / "p")
    write_report(report, params.zones, tmp_path / "cv.csv")
    back = read_params(tmp_path / "p")
    assert (back.t_heat, back.t_cool) == (params.t_heat, params.t_cool)
    for name in ("coefficients", "cycles", "noise_std", "floor"):
        np.testing.assert_array_equal(getattr(back, name), getattr(params, name))
    assert (tmp_path / "cv.csv").read_text().startswith("t_heat,t_cool,")


def test_holidays_count_as_off_days():
    assert day_types(np.array([np.datetime64("2010-12-08")]), {dt.date(2010, 12, 8)})[0] is DayType.OFF
