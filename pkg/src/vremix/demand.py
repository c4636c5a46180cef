"""Zonal electricity demand from daily-mean temperature.

The daily level of each zone is a piecewise-linear function of temperature
with heating and cooling branches below T_H and above T_C, fitted separately
for working days, Saturdays and days off. The hourly shape comes from a
composite daily cycle per day type, normalized to mean 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import DAY_TYPES, DayType, HourlySeries, derive_rng, day_types
from .errors import ConfigError, FitError, RangeError, ValidationError
from .ingest import (
    GridPoint,
    GridSeries,
    Sampling,
    _float,
    _read_rows,
    atomic_write_rows,
    format_float,
)

log = logging.getLogger(__name__)

KELVIN = 273.15
N_COEF = 3 * len(DAY_TYPES)
FLOOR_FRACTION = 0.01
DEFAULT_HEAT_GRID = tuple(np.round(np.arange(5.0, 15.0 + 1e-9, 0.5), 10))
DEFAULT_COOL_GRID = tuple(np.round(np.arange(10.0, 20.0 + 1e-9, 0.5), 10))


class PredictMode(Enum):
    DETERMINISTIC = "deterministic"
    SAMPLED = "sampled"
    DAILY = "daily"


@dataclass(frozen=True)
class ZoneTemperatures:
    """Daily-mean temperature (deg C) per zone, shape (n_days, n_zones)."""

    dates: np.ndarray = field(repr=False)
    zones: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        dates = np.asarray(self.dates).astype("datetime64[D]")
        values = np.array(self.values, dtype=float)
        if values.shape != (dates.size, len(self.zones)):
            raise ValidationError("zone temperatures must be (n_days, n_zones)")
        if dates.size > 1 and np.any(np.diff(dates).astype(np.int64) != 1):
            raise ValidationError("zone temperature dates must be consecutive")
        if not np.all(np.isfinite(values)):
            raise ValidationError("zone temperatures contain non-finite values")
        dates.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "zones", tuple(self.zones))

    def zone(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.zones.index(name)]
        except ValueError:
            raise ValidationError(f"no temperature for zone {name}") from None

    def window(self, first, last) -> "ZoneTemperatures":
        first, last = np.datetime64(first, "D"), np.datetime64(last, "D")
        if first < self.dates[0] or last > self.dates[-1] or first > last:
            raise RangeError(
                f"requested {first}..{last} outside temperature record "
                f"{self.dates[0]}..{self.dates[-1]}"
            )
        keep = (self.dates >= first) & (self.dates <= last)
        return ZoneTemperatures(self.dates[keep], self.zones, self.values[keep])


def zone_temperatures(temperature: GridSeries, points: Sequence[GridPoint],
                      zones: Sequence[str] | None = None) -> ZoneTemperatures:
    """Average 2 m temperature (K) over each zone's gridpoints, daily, in deg C."""
    zone_of = {p.gridpoint_id: p.zone for p in points}
    if zones is None:
        zones = tuple(dict.fromkeys(zone_of[g] for g in temperature.gridpoint_ids if g in zone_of))
    cols = []
    for z in zones:
        idx = [j for j, g in enumerate(temperature.gridpoint_ids) if zone_of.get(g) == z]
        if not idx:
            raise ConfigError(f"zone {z} has no temperature gridpoints")
        cols.append(temperature.values[:, idx].mean(axis=1))
    values = np.column_stack(cols) - KELVIN
    dates = temperature.times
    if temperature.sampling is Sampling.HOURLY:
        hours = temperature.times
        first = hours[0].astype("datetime64[D]")
        skip = int((hours[0] - first.astype("datetime64[h]")).astype(np.int64))
        if skip:
            skip = 24 - skip
        n_days = (hours.size - skip) // 24
        values = values[skip:skip + 24 * n_days].reshape(n_days, 24, -1).mean(axis=1)
        dates = hours[skip:skip + 24 * n_days:24].astype("datetime64[D]")
    return ZoneTemperatures(dates, tuple(zones), values)


def daily_means(series: HourlySeries):
    """Full UTC days of ``series`` as (dates, (n_days, 24) hourly matrix)."""
    start_day = series.start.astype("datetime64[D]")
    offset = int((series.start - start_day.astype("datetime64[h]")).astype(np.int64))
    skip = (24 - offset) % 24
    n_days = (len(series) - skip) // 24
    if n_days <= 0:
        return np.array([], dtype="datetime64[D]"), np.empty((0, 24))
    first = start_day + (1 if skip else 0)
    block = series.values[skip:skip + 24 * n_days].reshape(n_days, 24)
    return first + np.arange(n_days), block


def composite_cycles(series: HourlySeries, holidays: Iterable = frozenset()) -> dict[DayType, np.ndarray]:
    """Mean 24 h profile per day type, each normalized to mean 1."""
    dates, block = daily_means(series)
    kinds = day_types(dates, holidays)
    out = {}
    for d in DAY_TYPES:
        rows = block[kinds == d]
        if rows.shape[0] == 0:
            raise FitError(f"no full observed day of type {d.value}")
        profile = rows.mean(axis=0)
        mean = profile.mean()
        if not mean > 0:
            raise FitError(f"mean demand on {d.value} days is not positive")
        out[d] = profile / mean
    return out


def design_matrix(temperature, kinds, t_heat: float, t_cool: float) -> np.ndarray:
    """Regressors per day: [heat, cool, 1] in the block of the day's type."""
    t = np.asarray(temperature, dtype=float)
    kinds = np.asarray(kinds, dtype=object)
    x = np.zeros((t.size, N_COEF))
    heat = np.maximum(t_heat - t, 0.0)
    cool = np.maximum(t - t_cool, 0.0)
    for b, d in enumerate(DAY_TYPES):
        m = kinds == d
        x[m, 3 * b] = heat[m]
        x[m, 3 * b + 1] = cool[m]
        x[m, 3 * b + 2] = 1.0
    return x


@dataclass(frozen=True)
class RidgeFit:
    coef: np.ndarray
    alpha: float  # noise precision
    lam: float  # weight precision
    n_iter: int


def bayesian_ridge(x, y, tol=1e-8, max_iter=300, a1=1e-6, a2=1e-6, l1=1e-6, l2=1e-6) -> RidgeFit:
    """Evidence-maximizing ridge regression without intercept.

    The noise precision ``alpha`` and weight precision ``lam`` are updated by
    MacKay's fixed-point rules with Gamma hyperpriors until the coefficient
    vector moves by less than ``tol`` (L1 norm).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    eig = s ** 2
    uty = u.T @ y
    alpha = 1.0 / (np.var(y) + np.finfo(float).eps)
    lam = 1.0

    def coef_for(alpha, lam):
        return vt.T @ (s / (eig + lam / alpha) * uty)

    coef_old = None
    it = 0
    for it in range(1, max_iter + 1):
        coef = coef_for(alpha, lam)
        rss = float(np.sum((y - x @ coef) ** 2))
        gamma = float(np.sum(alpha * eig / (lam + alpha * eig)))
        lam = (gamma + 2 * l1) / (float(np.sum(coef ** 2)) + 2 * l2)
        alpha = (n - gamma + 2 * a1) / (rss + 2 * a2)
        if coef_old is not None and np.sum(np.abs(coef_old - coef)) < tol:
            break
        coef_old = coef
    return RidgeFit(coef_for(alpha, lam), alpha, lam, it)


def r2_score(y, y_hat) -> float:
    y = np.asarray(y, dtype=float)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - y_hat) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


def cv_score(x, y, blocks: int) -> float:
    """Mean out-of-block R² over ``blocks`` contiguous folds."""
    idx = np.array_split(np.arange(y.size), blocks)
    scores = []
    for test in idx:
        train = np.ones(y.size, dtype=bool)
        train[test] = False
        fit = bayesian_ridge(x[train], y[train])
        scores.append(r2_score(y[test], x[test] @ fit.coef))
    return float(np.mean(scores))


@dataclass(frozen=True)
class DemandModelParams:
    """Fitted demand model.

    ``coefficients[z]`` holds 9 values ordered (heat, cool, const) for work,
    sat and off days; ``cycles[z]`` is (3, 24) in the same day-type order.
    """

    zones: tuple[str, ...]
    t_heat: float
    t_cool: float
    coefficients: np.ndarray = field(repr=False)
    cycles: np.ndarray = field(repr=False)
    noise_std: np.ndarray = field(repr=False)
    floor: np.ndarray = field(repr=False)
    noise_precision: np.ndarray = field(repr=False)
    weight_precision: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = len(self.zones)
        if self.t_heat > self.t_cool:
            raise ValidationError("need T_H <= T_C")
        arrays = {
            "coefficients": (z, N_COEF), "cycles": (z, 3, 24), "noise_std": (z,),
            "floor": (z,), "noise_precision": (z,), "weight_precision": (z,),
        }
        for name, shape in arrays.items():
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != shape:
                raise ValidationError(f"demand params {name} must have shape {shape}")
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if np.any(self.noise_std < 0):
            raise ValidationError("noise standard deviation must be nonnegative")
        if np.any(self.cycles <= 0):
            raise ValidationError("composite cycles must be positive")
        object.__setattr__(self, "zones", tuple(self.zones))

    def zone_index(self, zone: str) -> int:
        try:
            return self.zones.index(zone)
        except ValueError:
            raise ValidationError(f"zone {zone} not in demand model") from None

    def daily_level(self, zone: str, temperature, kinds) -> np.ndarray:
        x = design_matrix(temperature, kinds, self.t_heat, self.t_cool)
        return x @ self.coefficients[self.zone_index(zone)]


@dataclass(frozen=True)
class DemandFitReport:
    r2: dict[str, float]
    grid: tuple[tuple[float, float], ...]
    cv_scores: np.ndarray = field(repr=False)  # (n_pairs, n_zones)
    chosen: tuple[float, float]

    @property
    def mean_scores(self) -> np.ndarray:
        return self.cv_scores.mean(axis=1)


def threshold_pairs(heat_grid: Sequence[float], cool_grid: Sequence[float]):
    pairs = tuple((float(h), float(c)) for h in heat_grid for c in cool_grid if h <= c)
    if not pairs:
        raise ConfigError("threshold grid is empty (need some T_H <= T_C)")
    return pairs


def _zone_training_data(demand: HourlySeries, temps: ZoneTemperatures, zone: str):
    dates, block = daily_means(demand)
    common, i_dem, i_tmp = np.intersect1d(dates, temps.dates, return_indices=True)
    return common, block[i_dem].mean(axis=1), temps.zone(zone)[i_tmp]


def fit(
    demand: Mapping[str, HourlySeries],
    temps: ZoneTemperatures,
    holidays: Iterable = frozenset(),
    heat_grid: Sequence[float] = DEFAULT_HEAT_GRID,
    cool_grid: Sequence[float] = DEFAULT_COOL_GRID,
    cv_blocks: int = 7,
) -> tuple[DemandModelParams, DemandFitReport]:
    """Fit coefficients per zone and pick shared thresholds by blocked CV.

    Parameters
    ----------
    demand : mapping of zone to HourlySeries
        Observed hourly demand in MW.
    temps : ZoneTemperatures
        Daily-mean zone temperatures in deg C.
    cv_blocks : int
        Number of contiguous folds; at least this many years of overlap
        between demand and temperature are required.
    """
    holidays = frozenset(holidays)
    pairs = threshold_pairs(heat_grid, cool_grid)
    if cv_blocks < 2:
        raise ConfigError("cv_blocks must be at least 2")
    zones = tuple(demand)
    data = {}
    for z in zones:
        dates, y, t = _zone_training_data(demand[z], temps, z)
        if dates.size < 365 * cv_blocks:
            raise FitError(
                f"zone {z}: {dates.size} days of demand/temperature overlap, "
                f"need {cv_blocks} years for {cv_blocks}-block cross-validation"
            )
        data[z] = (y, t, day_types(dates, holidays))

    scores = np.empty((len(pairs), len(zones)))
    for p, (th, tc) in enumerate(pairs):
        for j, z in enumerate(zones):
            y, t, kinds = data[z]
            scores[p, j] = cv_score(design_matrix(t, kinds, th, tc), y, cv_blocks)
    best = int(np.argmax(scores.mean(axis=1)))  # first maximum wins ties
    th, tc = pairs[best]
    log.info("demand thresholds T_H=%s T_C=%s (mean CV R2 %.4f)", th, tc, scores[best].mean())

    coefs, cycles, noise, floor, alphas, lams, r2 = [], [], [], [], [], [], {}
    for z in zones:
        y, t, kinds = data[z]
        x = design_matrix(t, kinds, th, tc)
        rf = bayesian_ridge(x, y)
        resid = y - x @ rf.coef
        coefs.append(rf.coef)
        noise.append(float(np.sqrt(np.mean(resid ** 2))))
        alphas.append(rf.alpha)
        lams.append(rf.lam)
        r2[z] = r2_score(y, x @ rf.coef)
        cyc = composite_cycles(demand[z], holidays)
        cycles.append(np.stack([cyc[d] for d in DAY_TYPES]))
        floor.append(FLOOR_FRACTION * float(np.mean(demand[z].values)))
    params = DemandModelParams(zones, th, tc, np.array(coefs), np.array(cycles),
                               np.array(noise), np.array(floor), np.array(alphas), np.array(lams))
    return params, DemandFitReport(r2, pairs, scores, (th, tc))


def predict(
    params: DemandModelParams,
    temps: ZoneTemperatures,
    holidays: Iterable = frozenset(),
    mode: PredictMode | str = PredictMode.DETERMINISTIC,
    seed: int = 0,
    first=None,
    last=None,
    zones: Sequence[str] | None = None,
) -> dict[str, HourlySeries]:
    """Hourly demand (MW) per zone on the dates ``first``..``last``.

    ``DETERMINISTIC`` multiplies the daily level by the day-type cycle,
    ``SAMPLED`` adds independent N(0, s_i) noise to every hour and ``DAILY``
    holds the daily level flat over the day. All modes floor the result at
    1% of the zone's mean observed demand.
    """
    mode = PredictMode(mode)
    first = temps.dates[0] if first is None else first
    last = temps.dates[-1] if last is None else last
    temps = temps.window(first, last)
    kinds = day_types(temps.dates, frozenset(holidays))
    block = np.array([DAY_TYPES.index(k) for k in kinds])
    start = temps.dates[0].astype("datetime64[h]")
    out = {}
    for z in zones or params.zones:
        i = params.zone_index(z)
        level = params.daily_level(z, temps.zone(z), kinds)
        if mode is PredictMode.DAILY:
            hourly = np.repeat(level, 24)
        else:
            hourly = (level[:, None] * params.cycles[i][block]).ravel()
        if mode is PredictMode.SAMPLED and params.noise_std[i] > 0:
            rng = derive_rng(seed, f"demand/{z}")
            hourly = hourly + rng.normal(0.0, params.noise_std[i], hourly.size)
        out[z] = HourlySeries(start, np.maximum(hourly, params.floor[i]))
    return out


_COEF_NAMES = ("a_heat", "a_cool", "a_const")


def write_params(params: DemandModelParams, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write_rows(directory / "thresholds.csv", ["t_heat", "t_cool"],
                      [[format_float(params.t_heat), format_float(params.t_cool)]])
    atomic_write_rows(
        directory / "coefficients.csv", ["zone", "day_type", *_COEF_NAMES],
        ([z, d.value, *map(format_float, params.coefficients[i, 3 * b:3 * b + 3])]
         for i, z in enumerate(params.zones) for b, d in enumerate(DAY_TYPES)),
    )
    atomic_write_rows(
        directory / "cycles.csv", ["zone", "day_type", "hour", "value"],
        ([z, d.value, str(h), format_float(params.cycles[i, b, h])]
         for i, z in enumerate(params.zones) for b, d in enumerate(DAY_TYPES) for h in range(24)),
    )
    atomic_write_rows(
        directory / "zones.csv",
        ["zone", "noise_std", "floor_mw", "noise_precision", "weight_precision"],
        ([z, *map(format_float, (params.noise_std[i], params.floor[i],
                                 params.noise_precision[i], params.weight_precision[i]))]
         for i, z in enumerate(params.zones)),
    )


def write_report(report: DemandFitReport, zones: Sequence[str], path):
    atomic_write_rows(
        path, ["t_heat", "t_cool", "mean_cv_r2", *(f"cv_r2_{z}" for z in zones)],
        ([format_float(th), format_float(tc), format_float(report.mean_scores[p]),
          *map(format_float, report.cv_scores[p])] for p, (th, tc) in enumerate(report.grid)),
    )


def read_params(directory) -> DemandModelParams:
    directory = Path(directory)
    path, header, rows = _read_rows(directory / "thresholds.csv")
    if header != ["t_heat", "t_cool"] or len(rows) != 1:
        raise ValidationError(f"{path}: expected one t_heat,t_cool row")
    n, r = rows[0]
    th, tc = _float(r[0], path, n, "t_heat"), _float(r[1], path, n, "t_cool")

    path, header, rows = _read_rows(directory / "zones.csv")
    if header != ["zone", "noise_std", "floor_mw", "noise_precision", "weight_precision"]:
        raise ValidationError(f"{path}: unexpected header")
    zones = tuple(r[0] for _, r in rows)
    zvals = np.array([[_float(v, path, n, header[k + 1]) for k, v in enumerate(r[1:])] for n, r in rows])
    zvals = zvals.reshape(len(zones), 4)

    kinds = {d.value: b for b, d in enumerate(DAY_TYPES)}
    coef = np.full((len(zones), N_COEF), np.nan)
    path, header, rows = _read_rows(directory / "coefficients.csv")
    if header != ["zone", "day_type", *_COEF_NAMES]:
        raise ValidationError(f"{path}: unexpected header")
    for n, r in rows:
        if r[0] not in zones or r[1] not in kinds:
            raise ValidationError(f"{path}:{n}: unknown zone or day type")
        b = kinds[r[1]]
        coef[zones.index(r[0]), 3 * b:3 * b + 3] = [_float(v, path, n, "coefficient") for v in r[2:5]]

    cycles = np.full((len(zones), 3, 24), np.nan)
    path, header, rows = _read_rows(directory / "cycles.csv")
    if header != ["zone", "day_type", "hour", "value"]:
        raise ValidationError(f"{path}: unexpected header")
    for n, r in rows:
        if r[0] not in zones or r[1] not in kinds:
            raise ValidationError(f"{path}:{n}: unknown zone or day type")
        cycles[zones.index(r[0]), kinds[r[1]], int(r[2])] = _float(r[3], path, n, "value")
    if np.isnan(coef).any() or np.isnan(cycles).any():
        raise ValidationError(f"{directory}: incomplete demand parameter bundle")
    return DemandModelParams(zones, th, tc, coef, cycles, zvals[:, 0], zvals[:, 1], zvals[:, 2], zvals[:, 3])
