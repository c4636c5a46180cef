"""Diagnostics of capacity mixes and variance decomposition of series."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import HourlySeries, Mix, stack_aligned
from .errors import InsufficientData, NotFound, ValidationError
from .optimizer import Frontier, FrontierPoint, MeanRiskInputs, Status, penetration, risk, solve_p_min

log = logging.getLogger(__name__)

CONV_SHARE = 0.8
SAT_SHARE = 0.4
HOURS_PER_YEAR = 365 * 24
RATIO_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class MixDiagnostics:
    pv_fraction: float
    shortage_freq: float
    saturation_freq: float
    mu: float
    sigma: float


def pv_fraction(mix: Mix, pv_label: str = "pv") -> float:
    """Share of PV in the installed capacity; 0 for an empty mix."""
    total = mix.total()
    if total == 0:
        return 0.0
    pv = sum(w for (_, t), w in zip(mix.index, mix.w) if t == pv_label)
    return float(pv / total)


def shortage_saturation(production, demand, conv_share: float = CONV_SHARE,
                        sat_share: float = SAT_SHARE) -> tuple[float, float]:
    """Fractions of hours in shortage and in saturation.

    Shortage: ``P(t) < D(t) - conv_share * max(D)``, i.e. renewables fail to
    cover what conventional plants sized at ``conv_share`` of peak demand
    cannot. Saturation: ``P(t) > sat_share * D(t)``.
    """
    p, d = stack_aligned([production, demand])
    if np.any(d <= 0):
        raise ValidationError("demand must be strictly positive")
    shortage = p < d - conv_share * d.max()
    saturation = p > sat_share * d
    return float(shortage.mean()), float(saturation.mean())


def production_series(mix: Mix, cfs: Mapping[tuple[str, str], HourlySeries]) -> HourlySeries:
    """Total renewable output ``sum_k w_k eta_k(t)`` in MW."""
    try:
        series = [cfs[k] for k in mix.index]
    except KeyError as exc:
        raise ValidationError(f"no capacity-factor series for {exc}") from None
    eta = stack_aligned(series)
    return series[0].with_values(mix.w @ eta)


def evaluate_mix(mix: Mix, inputs: MeanRiskInputs, cfs: Mapping[tuple[str, str], HourlySeries],
                 demand_total: HourlySeries, conv_share: float = CONV_SHARE,
                 sat_share: float = SAT_SHARE) -> MixDiagnostics:
    if mix.index != inputs.index:
        raise ValidationError("mix and mean-risk inputs use different component layouts")
    short, sat = shortage_saturation(production_series(mix, cfs), demand_total, conv_share, sat_share)
    return MixDiagnostics(pv_fraction(mix), short, sat, penetration(mix.w, inputs), risk(mix.w, inputs))


@dataclass(frozen=True)
class SpecialPoints:
    min_risk: FrontierPoint
    max_ratio: FrontierPoint
    high_penetration: FrontierPoint | None


def special_points(frontier: Frontier, reference_risk: float | None = None) -> SpecialPoints:
    """Minimum-risk, maximum mean-risk ratio and high-penetration mixes.

    Raises
    ------
    NotFound
        If the frontier is empty, has no point with positive risk, or no
        point has risk at most ``reference_risk``.
    """
    pts = list(frontier.points if isinstance(frontier, Frontier) else frontier)
    if not pts:
        raise NotFound("frontier is empty")
    min_risk = min(pts, key=lambda p: p.sigma)
    positive = [p for p in pts if p.sigma > 0]
    if not positive:
        raise NotFound("no frontier point with positive risk")
    best = max(p.mu / p.sigma for p in positive)
    tied = [p for p in positive if p.mu / p.sigma >= best * (1 - RATIO_TIE_RTOL)]
    max_ratio = min(tied, key=lambda p: p.sigma)
    high = None
    if reference_risk is not None:
        ok = [p for p in pts if p.sigma <= reference_risk]
        if not ok:
            raise NotFound(f"no frontier point with risk <= {reference_risk:.6g}")
        high = max(ok, key=lambda p: p.mu)
    return SpecialPoints(min_risk, max_ratio, high)


@dataclass(frozen=True)
class Suboptimality:
    sigma_mix: float
    sigma_optimal: float
    suboptimal: bool

    @property
    def excess(self) -> float:
        return self.sigma_mix / self.sigma_optimal - 1 if self.sigma_optimal > 0 else math.inf


def suboptimality(mix: Mix, inputs: MeanRiskInputs, total_capacity: float | None = None,
                  rtol: float = 1e-6) -> Suboptimality:
    """Compare a mix's risk with the optimal risk at the same penetration.

    A mix whose risk exceeds the optimum lies to the right of the frontier.
    """
    mu = penetration(mix.w, inputs)
    sigma = risk(mix.w, inputs)
    opt = solve_p_min(inputs, mu, total_capacity)
    if isinstance(opt, Status):
        raise NotFound(f"no optimal mix at penetration {mu:.6g}: {opt.value}")
    return Suboptimality(sigma, opt.sigma, bool(sigma > opt.sigma * (1 + rtol)))


def running_mean(x, window: int) -> np.ndarray:
    """Centered running mean; the window shrinks at both ends of the series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    left = window // 2
    right = window - 1 - left
    csum = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(n)
    lo = np.maximum(i - left, 0)
    hi = np.minimum(i + right, n - 1) + 1
    return (csum[hi] - csum[lo]) / (hi - lo)


@dataclass(frozen=True)
class VarianceBands:
    interannual_pct: float
    seasonal_pct: float
    intraday_pct: float
    degenerate: bool = False


def variance_bands(series, year_window: int = HOURS_PER_YEAR, day_window: int = 24) -> VarianceBands:
    """Share of variance above one year, between a day and a year, and below a day.

    Low-pass = running mean over ``year_window``; band-pass = running mean
    over ``day_window`` minus the low-pass; high-pass = series minus the
    daily running mean. Shares are normalized by the sum of the three
    component variances.
    """
    x = series.values if isinstance(series, HourlySeries) else np.asarray(series, dtype=float)
    if x.size < 2 * year_window:
        raise InsufficientData(f"series of {x.size} samples shorter than two year windows")
    low = running_mean(x, year_window)
    day = running_mean(x, day_window)
    parts = np.array([np.var(low), np.var(day - low), np.var(x - day)])
    total = parts.sum()
    scale = max(float(np.mean(x * x)), 1e-300)
    if total <= 1e-24 * scale or total == 0:
        log.warning("series has no variance; bands reported as 0, 0, 0")
        return VarianceBands(0.0, 0.0, 0.0, True)
    pct = parts / total * 100
    return VarianceBands(float(pct[0]), float(pct[1]), float(pct[2]))
