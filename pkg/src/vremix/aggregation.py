"""Gridpoint power to zonal capacity factors, with mean bias correction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import GridPower, HourlySeries
from .errors import ConfigError, DomainError, ValidationError
from .ingest import GridPoint

log = logging.getLogger(__name__)

CLIP_WARN_FRACTION = 1e-3


def aggregate_zone(power: GridPower, nominal, points: Sequence[GridPoint],
                   zones: Sequence[str] | None = None) -> dict[str, HourlySeries]:
    """Capacity-weighted zonal capacity factor ``sum P_g / sum nominal_g``.

    Parameters
    ----------
    power : GridPower
        Hourly power per gridpoint.
    nominal : float or array_like
        Nominal power per gridpoint, same units as ``power``.
    points : sequence of GridPoint
        Metadata giving each gridpoint's zone.
    zones : sequence of str, optional
        Zones to produce; defaults to all zones of ``points``.
    """
    nominal = np.broadcast_to(np.asarray(nominal, dtype=float), (len(power.gridpoint_ids),))
    if np.any(nominal <= 0):
        raise DomainError("nominal power must be positive")
    zone_of = {p.gridpoint_id: p.zone for p in points}
    missing = [g for g in power.gridpoint_ids if g not in zone_of]
    if missing:
        raise ValidationError(f"gridpoints without zone metadata: {missing}")
    if zones is None:
        zones = tuple(dict.fromkeys(p.zone for p in points))
    out = {}
    for z in zones:
        cols = [j for j, g in enumerate(power.gridpoint_ids) if zone_of[g] == z]
        if not cols:
            raise ConfigError(f"zone {z} has no gridpoints")
        cf = power.values[:, cols].sum(axis=1) / nominal[cols].sum()
        out[z] = HourlySeries(power.start, cf)
    return out


@dataclass(frozen=True)
class BiasCorrection:
    series: HourlySeries = field(repr=False)
    factor: float
    target: float
    raw_mean: float
    clip_count: int

    @property
    def mean_deviation(self) -> float:
        """Relative shortfall of the corrected mean caused by clipping."""
        return float(self.series.values.mean()) / self.target - 1.0


def bias_correct(series: HourlySeries, target: float) -> BiasCorrection:
    """Rescale so the long-run mean equals ``target``; clip at 1."""
    if not 0 < target < 1:
        raise DomainError(f"target mean capacity factor {target} not in (0, 1)")
    raw_mean = float(np.mean(series.values))
    if not raw_mean > 0:
        raise DomainError("cannot bias-correct a series with nonpositive mean")
    factor = target / raw_mean
    scaled = series.values * factor
    over = scaled > 1.0
    clip_count = int(over.sum())
    if clip_count > CLIP_WARN_FRACTION * scaled.size:
        log.warning("bias correction clipped %d of %d values (factor %.4g)",
                    clip_count, scaled.size, factor)
    corrected = np.where(over, 1.0, scaled)
    return BiasCorrection(series.with_values(corrected), factor, target, raw_mean, clip_count)


def correct_all(raw: Mapping[tuple[str, str], HourlySeries],
                targets: Mapping[tuple[str, str], float]) -> dict[tuple[str, str], BiasCorrection]:
    """Bias-correct every (zone, technology) series; missing targets raise ConfigError."""
    out = {}
    for key, s in raw.items():
        if key not in targets:
            raise ConfigError(f"no capacity-factor target for {key[0]}/{key[1]}")
        out[key] = bias_correct(s, targets[key])
    return out
