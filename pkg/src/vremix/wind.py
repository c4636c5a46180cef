"""Wind speed to turbine power per gridpoint.

Chain: power-law extrapolation to hub height, moist-air density correction
of the speed, and a piecewise-linear power curve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import GridPower
from .errors import ConfigError, DomainError, ParseError, ValidationError
from .ingest import GridSeries, Sampling, _float, _read_rows

log = logging.getLogger(__name__)

R_DRY = 287.058  # J / (kg K)
RHO0 = 1.225  # kg / m3, density of manufacturer power curves
VIRTUAL_TEMPERATURE_COEF = 0.608


@dataclass(frozen=True)
class PowerCurve:
    """Turbine power curve given by (speed, power) knots.

    Power is interpolated linearly between knots, held at the last knot
    up to ``cut_out``, and is exactly zero below ``cut_in`` or at/above
    ``cut_out``.
    """

    speeds: np.ndarray = field(repr=False)
    powers: np.ndarray = field(repr=False)
    nominal_power: float
    cut_in: float
    cut_out: float

    def __post_init__(self):
        speeds = np.array(self.speeds, dtype=float)
        powers = np.array(self.powers, dtype=float)
        if speeds.ndim != 1 or speeds.shape != powers.shape or speeds.size < 2:
            raise ValidationError("power curve needs at least two (speed, power) knots")
        if np.any(np.diff(speeds) <= 0):
            raise ValidationError("power curve speeds must be strictly increasing")
        if np.any(powers < 0) or np.any(powers > self.nominal_power):
            raise ValidationError("power curve values must lie in [0, nominal_power]")
        if not 0 <= self.cut_in < self.cut_out:
            raise ValidationError("need 0 <= cut_in < cut_out")
        speeds.flags.writeable = False
        powers.flags.writeable = False
        object.__setattr__(self, "speeds", speeds)
        object.__setattr__(self, "powers", powers)

    def __call__(self, v):
        return turbine_power(v, self)


def load_power_curve(path=None) -> PowerCurve:
    """Read a ``speed_ms,power_w`` file.

    Header comment lines ``# nominal_power_w = ...``, ``# cut_in_ms = ...``
    and ``# cut_out_ms = ...`` carry the scalar attributes. Without a path
    the bundled 2.3 MW curve is returned.
    """
    if path is None:
        path = resources.files("vremix") / "data" / "swt_2.3_101.csv"
    path = Path(str(path))
    if not path.exists():
        raise ConfigError(f"power curve file not found: {path}")
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") and "=" in line:
                key, value = line[1:].split("=", 1)
                meta[key.strip()] = value.strip()
    _, header, rows = _read_rows(path)
    if header != ["speed_ms", "power_w"]:
        raise ParseError("header must be speed_ms,power_w", path, None)
    speeds = [_float(r[0], path, n, "speed_ms") for n, r in rows]
    powers = [_float(r[1], path, n, "power_w") for n, r in rows]
    try:
        nominal = float(meta.get("nominal_power_w", max(powers)))
        cut_in = float(meta.get("cut_in_ms", speeds[0]))
        cut_out = float(meta["cut_out_ms"]) if "cut_out_ms" in meta else speeds[-1] + 1e-9
    except ValueError as exc:
        raise ParseError(f"bad header value: {exc}", path) from None
    return PowerCurve(np.array(speeds), np.array(powers), nominal, cut_in, cut_out)


def extrapolate_hub_height(speed, z_ref, z_hub, exponent=1 / 7):
    """Power-law vertical extrapolation ``speed * (z_hub / z_ref) ** exponent``."""
    if z_ref <= 0 or z_hub <= 0:
        raise DomainError("heights must be positive")
    speed = np.asarray(speed, dtype=float)
    if np.any(speed < 0):
        raise DomainError("wind speed must be nonnegative")
    return speed * (z_hub / z_ref) ** exponent


def air_density(temperature, pressure, specific_humidity=0.0):
    """Moist-air density from the ideal gas law with virtual temperature.

    Parameters
    ----------
    temperature : array_like
        Air temperature in K.
    pressure : array_like
        Surface pressure in Pa.
    specific_humidity : array_like
        Specific humidity in kg/kg, in [0, 0.1).

    Returns
    -------
    ndarray
        Density in kg/m3.
    """
    t = np.asarray(temperature, dtype=float)
    p = np.asarray(pressure, dtype=float)
    q = np.asarray(specific_humidity, dtype=float)
    if np.any(t <= 0) or np.any(p <= 0):
        raise DomainError("temperature and pressure must be positive")
    if np.any(q < 0) or np.any(q >= 0.1):
        raise DomainError("specific humidity must lie in [0, 0.1)")
    return p / (R_DRY * t * (1 + VIRTUAL_TEMPERATURE_COEF * q))


def density_corrected_speed(v_hub, rho, rho0=RHO0):
    """Shift the speed by ``(rho / rho0) ** (1/3)`` so the curve moves horizontally."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or rho0 <= 0:
        raise DomainError("densities must be positive")
    return np.asarray(v_hub, dtype=float) * np.cbrt(rho / rho0)


def turbine_power(v, curve: PowerCurve):
    v = np.asarray(v, dtype=float)
    p = np.interp(v, curve.speeds, curve.powers, left=0.0, right=curve.powers[-1])
    p = np.where((v < curve.cut_in) | (v >= curve.cut_out), 0.0, p)
    return np.minimum(p, curve.nominal_power)


def _daily_density(speed: GridSeries, temperature, pressure, humidity):
    if temperature is None and pressure is None:
        return None
    if temperature is None or pressure is None:
        raise ConfigError("density correction needs both temperature and pressure")
    inputs = [temperature, pressure] + ([humidity] if humidity is not None else [])
    for s in inputs:
        if s.gridpoint_ids != speed.gridpoint_ids:
            raise ValidationError(f"{s.variable.value} gridpoints differ from wind speed")
    q = humidity.values if humidity is not None else 0.0
    rho = air_density(temperature.values, pressure.values, q)
    return temperature.times, rho


def _density_per_hour(hours: np.ndarray, density):
    """Match each hour to a density sample (daily or hourly)."""
    times, rho = density
    if times.dtype == np.dtype("datetime64[D]"):
        key = hours.astype("datetime64[D]")
    else:
        key = hours
    idx = np.searchsorted(times, key)
    if np.any(idx >= times.size) or np.any(times[np.minimum(idx, times.size - 1)] != key):
        raise ValidationError("density inputs do not cover the wind-speed period")
    return rho[idx]


def hourly_wind_power(
    speed: GridSeries,
    curve: PowerCurve,
    *,
    temperature: GridSeries | None = None,
    pressure: GridSeries | None = None,
    humidity: GridSeries | None = None,
    sampler=None,
    z_ref: float = 10.0,
    z_hub: float = 101.0,
    exponent: float = 1 / 7,
    rho0: float = RHO0,
    intraday: bool = True,
) -> GridPower:
    """Hourly power (W per turbine) at every gridpoint.

    Hourly input is transformed pointwise. Daily input requires an intraday
    ``sampler`` (see :class:`vremix.intraday.IntradaySampler`) that draws 24
    hourly hub-height speeds per day; each hour is then density-corrected
    with the day's density. With ``intraday=False`` daily means are pushed
    through the curve directly and repeated over the 24 hours of the day.
    """
    hub = extrapolate_hub_height(speed.values, z_ref, z_hub, exponent)
    density = _daily_density(speed, temperature, pressure, humidity)
    start = speed.hourly_start()

    if speed.sampling is Sampling.HOURLY:
        log.info("hourly wind input: intraday sampler bypassed")
        if density is not None:
            hub = density_corrected_speed(hub, _density_per_hour(speed.times, density), rho0)
        return GridPower(start, speed.gridpoint_ids, turbine_power(hub, curve))

    rho = None
    if density is not None:
        rho = _density_per_hour(speed.times.astype("datetime64[h]"), density)
    if not intraday:
        v = hub if rho is None else density_corrected_speed(hub, rho, rho0)
        return GridPower(start, speed.gridpoint_ids, np.repeat(turbine_power(v, curve), 24, axis=0))
    if sampler is None:
        raise ConfigError("daily wind input requires intraday sampler parameters")
    hourly = sampler.sample(hub, speed.times)  # (n_days, 24, G)
    if rho is not None:
        hourly = density_corrected_speed(hourly, rho[:, None, :], rho0)
    power = turbine_power(hourly, curve).reshape(-1, hub.shape[1])
    return GridPower(start, speed.gridpoint_ids, power)
