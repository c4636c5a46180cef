import numpy as np
import pytest
from helpers import ray_dataset
from hypothesis import given, settings
from hypothesis import strategies as st

from vremix.analysis import (
    evaluate_mix,
    pv_fraction,
    running_mean,
    shortage_saturation,
    special_points,
    suboptimality,
    variance_bands,
)
from vremix.core import ComponentIndex, HourlySeries, Mix
from vremix.errors import InsufficientData, NotFound
from vremix.optimizer import FrontierPoint, assemble_inputs, compute_frontier, solve_p_min

START = np.datetime64("2010-01-01T00")
IDX = ComponentIndex.product(["N", "S"])


def series(values):
    return HourlySeries(START, np.asarray(values, dtype=float))


def test_pv_fraction_examples():
    assert pv_fraction(Mix(IDX, [3.0, 0.0, 1.0, 0.0])) == 1.0
    assert pv_fraction(Mix(IDX, [18.8, 8.9, 0.0, 0.0])) == pytest.approx(0.679, abs=5e-4)
    assert pv_fraction(Mix(IDX, [0.0] * 4)) == 0.0


def test_shortage_saturation_hand_series():
    d = series([100, 100, 100, 100, 200])
    p = series([10, 50, 41, 39, 15])
    assert shortage_saturation(p, d) == (0.2, 0.4)


def test_shortage_saturation_limits():
    d = series(np.full(10, 500.0))
    assert shortage_saturation(d, d) == (0.0, 1.0)
    assert shortage_saturation(series(np.zeros(10)), d) == (1.0, 0.0)


def test_saturation_is_scale_invariant():
    rng = np.random.default_rng(0)
    d, p = rng.uniform(50, 200, 500), rng.uniform(0, 150, 500)
    for a in (0.5, 3.0):
        assert shortage_saturation(series(a * p), series(a * d))[1] == shortage_saturation(series(p), series(d))[1]


def test_shortage_is_scale_invariant_but_not_shift_invariant():
    d, p = np.array([100.0, 200.0, 180.0]), np.array([30.0, 30.0, 30.0])
    base = shortage_saturation(series(p), series(d))[0]
    assert base == pytest.approx(1 / 3)
    assert shortage_saturation(series(7 * p), series(7 * d))[0] == base
    # the conventional cap follows the peak, so a uniform shift of demand moves hours into shortage
    assert shortage_saturation(series(p), series(d + 60))[0] == pytest.approx(2 / 3)


@pytest.fixture(scope="module")
def ray():
    cfs, dem = ray_dataset(4000, seed=5)
    return cfs, dem, assemble_inputs(cfs, dem)


def test_evaluate_mix_homogeneity(ray):
    cfs, dem, mr = ray
    mix = Mix(IDX, [20000.0, 30000.0, 10000.0, 25000.0])
    a = evaluate_mix(mix, mr, cfs, dem)
    b = evaluate_mix(Mix(IDX, 2 * mix.w), mr, cfs, dem)
    assert b.mu == pytest.approx(2 * a.mu, rel=1e-12)
    assert b.sigma == pytest.approx(2 * a.sigma, rel=1e-12)
    assert b.pv_fraction == a.pv_fraction
    assert 0 <= a.shortage_freq <= 1 and 0 <= a.saturation_freq <= 1


def test_evaluate_empty_mix(ray):
    cfs, dem, mr = ray
    diag = evaluate_mix(Mix(IDX, [0.0] * 4), mr, cfs, dem)
    assert (diag.mu, diag.sigma, diag.saturation_freq) == (0.0, 0.0, 0.0)
    assert diag.shortage_freq == np.mean(dem.values > 0.8 * dem.values.max())


def test_special_points_on_ray(ray):
    mr = ray[2]
    fr = compute_frontier(mr, step=0.05, mu_max_cap=0.3)
    sp = special_points(fr)
    assert sp.min_risk.sigma == 0.0
    smallest_positive = min(p.sigma for p in fr if p.sigma > 0)
    assert sp.max_ratio.sigma == smallest_positive


def test_special_points_constrained_frontier(ray):
    mr = ray[2]
    fr = compute_frontier(mr, step=0.02, total_capacity=1.2 * mr.E_D)
    sp = special_points(fr, reference_risk=float(np.median(fr.sigma)))
    assert sp.min_risk is fr.points[0]
    assert sp.min_risk.mu == fr.mu.min()
    ratios = fr.mu / fr.sigma
    assert sp.max_ratio.mu / sp.max_ratio.sigma == ratios.max()
    assert sp.high_penetration.sigma <= np.median(fr.sigma)
    assert sp.high_penetration.mu == fr.mu[fr.sigma <= np.median(fr.sigma)].max()


def test_special_points_not_found(ray):
    mr = ray[2]
    fr = compute_frontier(mr, step=0.05, total_capacity=1.2 * mr.E_D)
    with pytest.raises(NotFound):
        special_points(fr, reference_risk=0.5 * fr.sigma.min())
    with pytest.raises(NotFound):
        special_points([])
    zero = FrontierPoint(Mix(IDX, [0.0] * 4), 0.0, 0.0, 0.0)
    with pytest.raises(NotFound):
        special_points([zero])


def test_suboptimality(ray):
    mr = ray[2]
    opt = solve_p_min(mr, 0.2)
    assert not suboptimality(opt.w, mr).suboptimal
    skewed = Mix(IDX, [0.0, 0.0, 0.0, 0.2 * mr.E_D / mr.m[3]])
    verdict = suboptimality(skewed, mr)
    assert verdict.suboptimal and verdict.excess > 0


def test_running_mean_edges():
    x = np.arange(6.0)
    np.testing.assert_allclose(running_mean(x, 3), [0.5, 1, 2, 3, 4, 4.5])
    np.testing.assert_allclose(running_mean(x, 1), x)
    np.testing.assert_allclose(running_mean(x, 4), [0.5, 1, 1.5, 2.5, 3.5, 4])


def test_variance_bands_intraday_sinusoid():
    t = np.arange(2 * 8760)
    vb = variance_bands(np.sin(2 * np.pi * t / 12))
    assert vb.intraday_pct >= 95
    assert vb.interannual_pct + vb.seasonal_pct + vb.intraday_pct == pytest.approx(100, abs=1e-9)


def test_variance_bands_seasonal_sinusoid():
    t = np.arange(10 * 8760)
    vb = variance_bands(np.sin(2 * np.pi * t / 8760))
    assert vb.seasonal_pct >= 95


def test_variance_bands_constant_and_short():
    vb = variance_bands(np.full(2 * 8760, 3.0))
    assert (vb.interannual_pct, vb.seasonal_pct, vb.intraday_pct, vb.degenerate) == (0, 0, 0, True)
    with pytest.raises(InsufficientData):
        variance_bands(np.ones(8760))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_variance_bands_sum_to_100(seed):
    x = np.random.default_rng(seed).normal(size=200)
    vb = variance_bands(x, year_window=48, day_window=6)
    assert min(vb.interannual_pct, vb.seasonal_pct, vb.intraday_pct) >= 0
    assert vb.interannual_pct + vb.seasonal_pct + vb.intraday_pct == pytest.approx(100, abs=1e-9)
