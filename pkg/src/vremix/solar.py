"""Surface irradiance to PV module power per gridpoint.

Daily-mean irradiance is spread over the day with a constant clearness
index and the hourly extraterrestrial irradiance. Each hour is split into
beam and diffuse parts with Reindl's reduced correlation, transposed to a
south-facing plane tilted at the latitude (HDKR sky model), and converted to
power with an NOCT cell-temperature model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core import GridPower
from .errors import ConfigError, DomainError, ValidationError
from .ingest import GridPoint, GridSeries, Sampling

SOLAR_CONSTANT = 1367.0  # W/m2
KELVIN = 273.15

# Reindl, Beckman & Duffie (1990), reduced correlation with k_T and sin(alpha)
REINDL_KT_LOW = 0.3
REINDL_KT_HIGH = 0.78
REINDL_LOW = (1.020, -0.254, 0.0123)  # capped at 1.0
REINDL_MID = (1.400, -1.749, 0.177)  # clamped to [0.1, 0.97]
REINDL_HIGH = (0.0, 0.486, -0.182)  # floored at 0.1
REINDL_MID_BOUNDS = (0.1, 0.97)
REINDL_HIGH_FLOOR = 0.1


@dataclass(frozen=True)
class PvConstants:
    """Module and installation constants. Temperatures are in kelvin."""

    nominal_power: float = 250.0  # W
    module_area: float = 1.675  # m2
    eta_ref: float = 250.0 / 1.675 / 1000.0
    gamma: float = 0.004  # 1/K
    t_ref: float = 25.0 + KELVIN
    noct: float = 46.0 + KELVIN
    system_efficiency: float = 0.86
    albedo: float = 0.2
    elevation_cutoff_deg: float = 10.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) <= 0 and f.name != "albedo":
                raise ConfigError(f"pv constant {f.name} must be positive")
        if not 0 < self.eta_ref < 1:
            raise ConfigError("eta_ref must lie in (0, 1)")
        if not 0 <= self.albedo <= 1:
            raise ConfigError("albedo must lie in [0, 1]")

    @classmethod
    def from_mapping(cls, values) -> "PvConstants":
        """Build from a config mapping; keys that are not constants (file paths) are ignored."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                continue
            try:
                kwargs[key] = float(value)
            except ValueError:
                raise ConfigError(f"pv.{key}: not a number: {value!r}") from None
        return replace(cls(), **kwargs)


@dataclass(frozen=True)
class SolarPosition:
    """Solar geometry arrays (radians), broadcast over (time, gridpoint)."""

    declination: np.ndarray = field(repr=False)
    hour_angle: np.ndarray = field(repr=False)
    cos_zenith: np.ndarray = field(repr=False)
    cos_incidence: np.ndarray = field(repr=False)
    tilt: np.ndarray = field(repr=False)

    @property
    def zenith(self):
        return np.arccos(np.clip(self.cos_zenith, -1, 1))

    @property
    def elevation(self):
        return np.pi / 2 - self.zenith

    @property
    def incidence(self):
        return np.arccos(np.clip(self.cos_incidence, -1, 1))


def day_of_year(times) -> np.ndarray:
    days = np.asarray(times).astype("datetime64[D]")
    return (days - days.astype("datetime64[Y]")).astype(np.int64) + 1


def declination(n):
    return np.radians(23.45) * np.sin(2 * np.pi * (284 + np.asarray(n)) / 365)


def eccentricity_factor(n):
    return 1 + 0.033 * np.cos(2 * np.pi * np.asarray(n) / 365)


def equation_of_time(n):
    """Spencer's series, minutes."""
    b = 2 * np.pi * (np.asarray(n) - 1) / 365
    return 229.18 * (0.000075 + 0.001868 * np.cos(b) - 0.032077 * np.sin(b)
                     - 0.014615 * np.cos(2 * b) - 0.04089 * np.sin(2 * b))


def solar_position(times, lat, lon, tilt=None) -> SolarPosition:
    """Geometry at the half-hour of each UTC hour in ``times``.

    ``times`` has shape (N,) and ``lat``/``lon`` (degrees) shape (G,); the
    result arrays are (N, G). The plane faces the equator with tilt equal to
    the latitude unless ``tilt`` (degrees) is given.
    """
    times = np.asarray(times).astype("datetime64[h]")
    lat = np.radians(np.atleast_1d(np.asarray(lat, dtype=float)))
    lon = np.atleast_1d(np.asarray(lon, dtype=float))
    beta = lat if tilt is None else np.radians(np.broadcast_to(np.asarray(tilt, dtype=float), lat.shape))
    n = day_of_year(times)
    hour = (times - times.astype("datetime64[D]")).astype(np.int64)
    solar_time = (hour + 0.5)[:, None] + lon[None, :] / 15 + equation_of_time(n)[:, None] / 60
    omega = np.radians(15 * (solar_time - 12))
    delta = declination(n)[:, None]
    cos_z = np.sin(lat) * np.sin(delta) + np.cos(lat) * np.cos(delta) * np.cos(omega)
    cos_t = (np.sin(delta) * np.sin(lat - beta)
             + np.cos(delta) * np.cos(lat - beta) * np.cos(omega))
    return SolarPosition(np.broadcast_to(delta, omega.shape), omega, cos_z, cos_t,
                         np.broadcast_to(np.abs(beta), omega.shape))


def extraterrestrial_from_position(pos: SolarPosition, times) -> np.ndarray:
    e0 = eccentricity_factor(day_of_year(np.asarray(times).astype("datetime64[h]")))[:, None]
    return SOLAR_CONSTANT * e0 * np.clip(pos.cos_zenith, 0, None)


def extraterrestrial_hourly(date, hour, lat, lon=0.0) -> float:
    """Extraterrestrial irradiance on a horizontal plane, W/m2.

    Evaluated at ``hour:30`` UTC on ``date`` at the given coordinates.
    """
    t = np.datetime64(date, "D") + np.timedelta64(int(hour), "h")
    pos = solar_position(np.array([t]), lat, lon)
    return float(extraterrestrial_from_position(pos, np.array([t]))[0, 0])


def daily_extraterrestrial(times_daily, lat, lon):
    """Hourly extraterrestrial irradiance, shape (D, 24, G), and its daily mean (D, G)."""
    days = np.asarray(times_daily).astype("datetime64[D]")
    hours = (days[:, None].astype("datetime64[h]") + np.arange(24)).ravel()
    pos = solar_position(hours, lat, lon)
    i0 = extraterrestrial_from_position(pos, hours).reshape(days.size, 24, -1)
    return i0, i0.mean(axis=1)


def clearness_index(irradiance, extraterrestrial):
    """Clearness index clipped to [0, 1]; zero where the extraterrestrial mean is 0."""
    i = np.asarray(irradiance, dtype=float)
    i0 = np.asarray(extraterrestrial, dtype=float)
    if np.any(i < 0):
        raise DomainError("surface irradiance must be nonnegative")
    if np.any(i0 < 0):
        raise DomainError("extraterrestrial irradiance must be nonnegative")
    with np.errstate(divide="ignore", invalid="ignore"):
        kt = np.where(i0 > 0, i / np.where(i0 > 0, i0, 1.0), 0.0)
    return np.clip(kt, 0.0, 1.0)


def hourly_surface_irradiance(kt, i0_hourly):
    return np.asarray(kt, dtype=float) * np.asarray(i0_hourly, dtype=float)


def diffuse_fraction(kt, sin_elevation):
    """Diffuse share of global horizontal irradiance (Reindl reduced form).

    Parameters
    ----------
    kt : array_like
        Clearness index in [0, 1].
    sin_elevation : array_like
        Sine of the solar elevation.
    """
    kt = np.asarray(kt, dtype=float)
    s = np.asarray(sin_elevation, dtype=float)
    low = np.minimum(REINDL_LOW[0] + REINDL_LOW[1] * kt + REINDL_LOW[2] * s, 1.0)
    mid = np.clip(REINDL_MID[0] + REINDL_MID[1] * kt + REINDL_MID[2] * s, *REINDL_MID_BOUNDS)
    high = np.maximum(REINDL_HIGH[1] * kt + REINDL_HIGH[2] * s, REINDL_HIGH_FLOOR)
    out = np.where(kt <= REINDL_KT_LOW, low, np.where(kt < REINDL_KT_HIGH, mid, high))
    return np.clip(out, 0.0, 1.0)


def split_irradiance(i, kt, sin_elevation):
    """Return (diffuse, direct) horizontal components that sum to ``i``."""
    i = np.asarray(i, dtype=float)
    diffuse = diffuse_fraction(kt, sin_elevation) * i
    return diffuse, i - diffuse


@dataclass(frozen=True)
class TiltedIrradiance:
    direct: np.ndarray = field(repr=False)
    diffuse: np.ndarray = field(repr=False)
    reflected: np.ndarray = field(repr=False)

    @property
    def total(self):
        return np.maximum(self.direct + self.diffuse + self.reflected, 0.0)


def tilted_irradiance(i, i_diffuse, i_direct, position: SolarPosition, i0,
                      albedo=0.2, elevation_cutoff_deg=10.0) -> TiltedIrradiance:
    """Irradiance on the tilted plane, split into direct, diffuse and reflected.

    Diffuse follows the HDKR combination of circumsolar (anisotropy index
    ``A = I_b / I_0``), isotropic and horizon-brightening terms. Beam-related
    terms are dropped when the sun is below ``elevation_cutoff_deg`` or
    behind the plane.
    """
    i, i_d, i_b = (np.asarray(x, dtype=float) for x in (i, i_diffuse, i_direct))
    if np.any(i_d < 0) or np.any(i_b < 0):
        raise DomainError("irradiance components must be nonnegative")
    if np.any(np.abs(i - i_d - i_b) > 1e-9 * np.maximum(1.0, np.abs(i))):
        raise DomainError("diffuse + direct does not equal global irradiance")
    cos_z = position.cos_zenith
    cos_t = position.cos_incidence
    beta = position.tilt
    sun_ok = (cos_z > math.sin(math.radians(elevation_cutoff_deg))) & (cos_t > 0)
    i_b_eff = np.where(sun_ok, i_b, 0.0)
    rb = np.where(sun_ok, cos_t / np.where(sun_ok, cos_z, 1.0), 0.0)
    i0 = np.asarray(i0, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        aniso = np.clip(np.where(i0 > 0, i_b_eff / np.where(i0 > 0, i0, 1.0), 0.0), 0, 1)
        f = np.sqrt(np.where(i > 0, i_b_eff / np.where(i > 0, i, 1.0), 0.0))
    cos_b = np.cos(beta)
    direct = i_b_eff * rb
    diffuse = (i_d * aniso * rb
               + i_d * (1 - aniso) * (1 + cos_b) / 2 * (1 + f * np.sin(beta / 2) ** 3))
    reflected = i * albedo * (1 - cos_b) / 2
    return TiltedIrradiance(direct, diffuse, reflected)


def cell_temperature(t_air, wind, g_t, constants: PvConstants = PvConstants()):
    """NOCT cell temperature (K) from air temperature (K), wind (m/s), plane irradiance."""
    g_t = np.asarray(g_t, dtype=float)
    if np.any(g_t < 0):
        raise DomainError("plane-of-array irradiance must be nonnegative")
    wind = np.asarray(wind, dtype=float)
    rise = (constants.noct - (20.0 + KELVIN)) * 9.5 / (5.7 + 3.8 * wind)
    return np.asarray(t_air, dtype=float) + g_t / 800 * rise * (1 - constants.eta_ref / 0.9)


def pv_power(g_t, t_cell, constants: PvConstants = PvConstants()):
    """Module output in W, floored at 0 and capped at the nominal power."""
    g_t = np.asarray(g_t, dtype=float)
    if np.any(g_t < 0):
        raise DomainError("plane-of-array irradiance must be nonnegative")
    eff = constants.eta_ref * (1 - constants.gamma * (np.asarray(t_cell, dtype=float) - constants.t_ref))
    p = eff * g_t * constants.module_area * constants.system_efficiency
    return np.clip(p, 0.0, constants.nominal_power)


def values_at_hours(series: GridSeries, hours: np.ndarray, gridpoint_ids) -> np.ndarray:
    """Values of ``series`` at each hour; daily values are held over the day."""
    if series.gridpoint_ids != tuple(gridpoint_ids):
        series = series.select(gridpoint_ids)
    key = hours.astype("datetime64[D]") if series.sampling is Sampling.DAILY else hours
    idx = np.searchsorted(series.times, key)
    if np.any(idx >= series.n_times) or np.any(series.times[np.minimum(idx, series.n_times - 1)] != key):
        raise ValidationError(f"{series.variable.value} does not cover the irradiance period")
    return series.values[idx]


def hourly_pv_power(
    irradiance: GridSeries,
    temperature: GridSeries,
    wind: GridSeries,
    points: list[GridPoint],
    constants: PvConstants = PvConstants(),
) -> GridPower:
    """Hourly power (W per module) at every gridpoint of ``irradiance``."""
    by_id = {p.gridpoint_id: p for p in points}
    try:
        lat = np.array([by_id[g].lat for g in irradiance.gridpoint_ids])
        lon = np.array([by_id[g].lon for g in irradiance.gridpoint_ids])
    except KeyError as exc:
        raise ValidationError(f"no metadata for gridpoint {exc}") from None
    start = irradiance.hourly_start()
    if irradiance.sampling is Sampling.DAILY:
        i0, i0_mean = daily_extraterrestrial(irradiance.times, lat, lon)
        kt_daily = clearness_index(irradiance.values, i0_mean)
        n_days, g = kt_daily.shape
        i = hourly_surface_irradiance(kt_daily[:, None, :], i0).reshape(-1, g)
        kt = np.repeat(kt_daily, 24, axis=0)
        i0 = i0.reshape(-1, g)
    else:
        i0 = None
        i = irradiance.values
    hours = start + np.arange(i.shape[0]) * np.timedelta64(1, "h")
    pos = solar_position(hours, lat, lon)
    if i0 is None:
        i0 = extraterrestrial_from_position(pos, hours)
        kt = clearness_index(i, i0)
    i_d, i_b = split_irradiance(i, kt, pos.cos_zenith)
    tilted = tilted_irradiance(i, i_d, i_b, pos, i0, constants.albedo, constants.elevation_cutoff_deg)
    g_t = tilted.total
    t_air = values_at_hours(temperature, hours, irradiance.gridpoint_ids)
    v = values_at_hours(wind, hours, irradiance.gridpoint_ids)
    power = pv_power(g_t, cell_temperature(t_air, v, g_t, constants), constants)
    return GridPower(start, irradiance.gridpoint_ids, power)
