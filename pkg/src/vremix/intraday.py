"""Sub-daily wind fluctuations from a Weibull marginal + Gaussian copula.

Hourly speeds at G gridpoints are modelled as Weibull(k_g, lambda_g)
marginals tied together by a Gaussian copula with correlation R. Shapes and
R are fitted once on hourly training data; for each day the scales are set
so that each marginal mean equals the daily-mean input, and 24 hours are
drawn independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import special

from .core import derive_rng
from .errors import FitError, ValidationError
from .ingest import (
    GridPoint,
    GridSeries,
    _float,
    _read_rows,
    atomic_write_rows,
    format_float,
)

SPEED_FLOOR = 0.01  # m/s, replaces zeros before taking logs
MIN_TRAINING_HOURS = 30 * 24
_Z_CLIP = 8.5
_EPOCH_ORDINAL = 719163  # date(1970, 1, 1).toordinal()


@dataclass(frozen=True)
class WeibullCopulaParams:
    gridpoint_ids: tuple[str, ...]
    shape: np.ndarray = field(repr=False)
    corr: np.ndarray = field(repr=False)

    def __post_init__(self):
        shape = np.array(self.shape, dtype=float)
        corr = np.array(self.corr, dtype=float)
        g = len(self.gridpoint_ids)
        if shape.shape != (g,) or corr.shape != (g, g):
            raise ValidationError("shape vector / correlation matrix do not match gridpoints")
        if np.any(~np.isfinite(shape)) or np.any(shape <= 0):
            raise ValidationError("Weibull shapes must be positive")
        if not np.allclose(corr, corr.T, atol=1e-12) or not np.allclose(np.diag(corr), 1.0, atol=1e-12):
            raise ValidationError("correlation matrix must be symmetric with unit diagonal")
        if g and np.linalg.eigvalsh(corr).min() < -1e-8:
            raise ValidationError("correlation matrix is not positive semi-definite")
        shape.flags.writeable = False
        corr.flags.writeable = False
        object.__setattr__(self, "gridpoint_ids", tuple(self.gridpoint_ids))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "corr", corr)
        object.__setattr__(self, "_factor", _correlation_factor(corr))

    @property
    def factor(self) -> np.ndarray:
        """Lower factor L with L @ L.T == corr."""
        return self._factor


def _correlation_factor(corr):
    try:
        return np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(corr)
        # roundoff eigenvalues of a singular matrix would be amplified by sqrt
        vals = np.where(vals > 1e-12 * vals.max(), vals, 0.0)
        return vecs * np.sqrt(vals)


def weibull_mle(x, tol=1e-10, max_iter=100):
    """Maximum-likelihood Weibull (shape, scale) for positive samples.

    Newton iteration on the profile-likelihood equation for the shape,
    with the scale in closed form given the shape.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2 or np.any(x <= 0):
        raise FitError("Weibull fit needs at least two positive samples")
    y = np.log(x)
    y_mean = y.mean()
    y_sd = y.std()
    if not y_sd > 1e-12:
        raise FitError("cannot fit a Weibull distribution to a constant series")
    y_max = y.max()
    k = math.pi / (math.sqrt(6) * y_sd)
    for _ in range(max_iter):
        e = np.exp(k * (y - y_max))
        s0 = e.sum()
        m1 = (y * e).sum() / s0
        m2 = (y * y * e).sum() / s0
        g = m1 - 1 / k - y_mean
        dg = m2 - m1 * m1 + 1 / (k * k)
        step = g / dg
        k_new = k - step
        while k_new <= 0:
            step /= 2
            k_new = k - step
        if abs(k_new - k) <= tol * k_new:
            k = k_new
            break
        k = k_new
    else:
        raise FitError(f"Weibull shape did not converge in {max_iter} iterations")
    scale = math.exp(y_max + math.log(np.mean(np.exp(k * (y - y_max)))) / k)
    return k, scale


def weibull_normal_scores(x, shape, scale):
    """Map Weibull samples to standard-normal scores z = Phi^-1(F(x))."""
    t = (np.asarray(x, dtype=float) / scale) ** shape
    survival = np.exp(-t)
    cdf = -np.expm1(-t)
    z = np.where(survival < 0.5, -special.ndtri(survival), special.ndtri(cdf))
    return np.clip(z, -_Z_CLIP, _Z_CLIP)


def nearest_psd_correlation(corr):
    """Clip negative eigenvalues at zero and restore the unit diagonal."""
    corr = (np.asarray(corr, dtype=float) + np.asarray(corr, dtype=float).T) / 2
    vals, vecs = np.linalg.eigh(corr)
    if vals.min() >= 0:
        out = corr
    else:
        out = (vecs * np.clip(vals, 0, None)) @ vecs.T
    d = np.sqrt(np.diag(out))
    out = out / np.outer(d, d)
    out = (out + out.T) / 2
    np.fill_diagonal(out, 1.0)
    return out


def fit_params(training, gridpoint_ids: Sequence[str] | None = None) -> WeibullCopulaParams:
    """Fit Weibull shapes and the copula correlation.

    Parameters
    ----------
    training : GridSeries or array_like
        Hourly wind speeds, shape (n_hours, n_gridpoints).
    gridpoint_ids : sequence of str, optional
        Column names when ``training`` is a plain array.
    """
    if isinstance(training, GridSeries):
        gridpoint_ids = training.gridpoint_ids
        speeds = training.values
    else:
        speeds = np.atleast_2d(np.asarray(training, dtype=float))
        if gridpoint_ids is None:
            gridpoint_ids = tuple(f"g{j}" for j in range(speeds.shape[1]))
    if speeds.shape[0] < MIN_TRAINING_HOURS:
        raise FitError(f"need at least 30 days of hourly training data, got {speeds.shape[0]} hours")
    if np.any(speeds < 0):
        raise FitError("training wind speeds must be nonnegative")
    speeds = np.maximum(speeds, SPEED_FLOOR)
    g = speeds.shape[1]
    shape = np.empty(g)
    scores = np.empty_like(speeds)
    for j in range(g):
        try:
            k, lam = weibull_mle(speeds[:, j])
        except FitError as exc:
            raise FitError(f"gridpoint {gridpoint_ids[j]}: {exc}") from None
        shape[j] = k
        scores[:, j] = weibull_normal_scores(speeds[:, j], k, lam)
    corr = np.atleast_2d(np.corrcoef(scores, rowvar=False)) if g > 1 else np.ones((1, 1))
    return WeibullCopulaParams(tuple(gridpoint_ids), shape, nearest_psd_correlation(corr))


def weibull_scale_for_mean(mean, shape):
    return np.asarray(mean, dtype=float) / special.gamma(1 + 1 / np.asarray(shape, dtype=float))


def sample_day(daily_means, params: WeibullCopulaParams, rng: np.random.Generator, hours: int = 24):
    """Draw ``hours`` x G hourly speeds whose marginal means equal ``daily_means``."""
    mean = np.asarray(daily_means, dtype=float)
    if mean.shape != params.shape.shape:
        raise ValidationError("daily means do not match the fitted gridpoints")
    if np.any(mean < 0):
        raise ValidationError("daily-mean wind speeds must be nonnegative")
    z = rng.standard_normal((hours, mean.size)) @ params.factor.T
    scale = weibull_scale_for_mean(mean, params.shape)
    # -log(1 - Phi(z)) evaluated as -log Phi(-z) for accuracy in the upper tail
    v = scale * (-special.log_ndtr(-z)) ** (1 / params.shape)
    v[:, mean == 0] = 0.0
    return v


def day_key(day: np.datetime64) -> int:
    return int(np.datetime64(day, "D").astype(np.int64)) + _EPOCH_ORDINAL


@dataclass(frozen=True)
class IntradaySampler:
    """Deterministic per-day sampling keyed on (seed, calendar day)."""

    params: WeibullCopulaParams
    seed: int = 0
    label: str = "wind-intraday"

    def sample(self, daily_means, dates) -> np.ndarray:
        """Return hourly speeds of shape (n_days, 24, G)."""
        daily_means = np.atleast_2d(np.asarray(daily_means, dtype=float))
        dates = np.asarray(dates).astype("datetime64[D]")
        if daily_means.shape[0] != dates.size:
            raise ValidationError("one date per row of daily means required")
        out = np.empty((dates.size, 24, daily_means.shape[1]))
        for i, day in enumerate(dates):
            rng = derive_rng(self.seed, self.label, day_key(day))
            out[i] = sample_day(daily_means[i], self.params, rng)
        return out


def write_params(params: WeibullCopulaParams, shape_path, corr_path):
    atomic_write_rows(shape_path, ["gridpoint_id", "shape"],
                      ([g, format_float(k)] for g, k in zip(params.gridpoint_ids, params.shape)))
    atomic_write_rows(corr_path, ["gridpoint_id", *params.gridpoint_ids],
                      ([g, *map(format_float, row)] for g, row in zip(params.gridpoint_ids, params.corr)))


def read_params(shape_path, corr_path) -> WeibullCopulaParams:
    path, header, rows = _read_rows(shape_path)
    if header != ["gridpoint_id", "shape"]:
        raise ValidationError(f"{path}: header must be gridpoint_id,shape")
    ids = tuple(r[0] for _, r in rows)
    shape = np.array([_float(r[1], path, n, "shape") for n, r in rows])
    cpath, cheader, crows = _read_rows(corr_path)
    if cheader[0] != "gridpoint_id" or tuple(cheader[1:]) != ids:
        raise ValidationError(f"{cpath}: correlation header does not match shape file")
    if tuple(r[0] for _, r in crows) != ids:
        raise ValidationError(f"{cpath}: correlation rows do not match shape file")
    corr = np.array([[_float(c, cpath, n, ids[j]) for j, c in enumerate(r[1:])] for n, r in crows])
    return WeibullCopulaParams(ids, shape, corr.reshape(len(ids), len(ids)))


def _haversine(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dlat = p2 - p1
    dlon = np.radians(lon2 - lon1)
    a = np.sin(dlat / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlon / 2) ** 2
    return 2 * np.arcsin(np.sqrt(np.clip(a, 0, 1)))


def nearest_neighbor_mapping(targets: Sequence[GridPoint], training: Sequence[GridPoint]) -> dict[str, str]:
    """Map each target gridpoint to the great-circle-nearest training gridpoint."""
    lat = np.array([p.lat for p in training])
    lon = np.array([p.lon for p in training])
    out = {}
    for p in targets:
        d = _haversine(p.lat, p.lon, lat, lon)
        out[p.gridpoint_id] = training[int(np.argmin(d))].gridpoint_id
    return out


def remap_params(params: WeibullCopulaParams, mapping: Mapping[str, str],
                 target_ids: Sequence[str]) -> WeibullCopulaParams:
    """Parameters for ``target_ids`` taken from their mapped training gridpoints."""
    try:
        src = [params.gridpoint_ids.index(mapping[t]) for t in target_ids]
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"intraday mapping incomplete: {exc}") from None
    corr = params.corr[np.ix_(src, src)]
    return WeibullCopulaParams(tuple(target_ids), params.shape[src], corr)


def write_mapping(path, mapping: Mapping[str, str]):
    atomic_write_rows(path, ["target_gridpoint_id", "training_gridpoint_id"],
                      ([t, s] for t, s in mapping.items()))


def load_mapping(path) -> dict[str, str]:
    path, header, rows = _read_rows(path)
    if header != ["target_gridpoint_id", "training_gridpoint_id"]:
        raise ValidationError(f"{path}: header must be target_gridpoint_id,training_gridpoint_id")
    return {r[0]: r[1] for _, r in rows}
