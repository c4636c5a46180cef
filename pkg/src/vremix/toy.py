"""Synthetic two-zone study used by the end-to-end tests and the README.

Everything is drawn from seeded generators, so ``make_toy`` writes the same
bytes on every call. Demand observations are produced by the demand model
itself with heating/cooling thresholds of 9.5 and 13.0 deg C, which makes
threshold recovery checkable.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import numpy as np
from scipy import special

from .core import DAY_TYPES, derive_rng, day_types
from .demand import KELVIN, design_matrix
from .ingest import (
    GridPoint,
    atomic_write_rows,
    atomic_write_text,
    format_float,
    format_time,
)
from .solar import daily_extraterrestrial

FIRST_DAY = np.datetime64("2008-01-01")
LAST_DAY = np.datetime64("2010-12-31")
TRAINING_DAYS = 60
T_HEAT, T_COOL = 9.5, 13.0

POINTS = (
    GridPoint("N1", 45.5, 9.2, "NORD"),
    GridPoint("N2", 45.1, 11.4, "NORD"),
    GridPoint("S1", 40.8, 14.3, "SUD"),
    GridPoint("S2", 38.1, 13.4, "SUD"),
)
ZONES = ("NORD", "SUD")

# (heat, cool, const) per day type: work, sat, off
COEFFICIENTS = {
    "NORD": (450.0, 900.0, 20000.0, 380.0, 760.0, 16500.0, 320.0, 640.0, 13500.0),
    "SUD": (260.0, 720.0, 11000.0, 220.0, 610.0, 9300.0, 190.0, 520.0, 7800.0),
}
CLIMATE = {  # mean temperature (C), seasonal amplitude (C), base wind (m/s)
    "NORD": (13.0, 10.5, 3.6),
    "SUD": (17.0, 8.0, 4.6),
}
CF_TARGETS = {
    ("NORD", "pv"): 0.121,
    ("NORD", "wind"): 0.204,
    ("SUD", "pv"): 0.156,
    ("SUD", "wind"): 0.209,
}
PRESCRIBED_MIX = {
    ("NORD", "pv"): 9000.0,
    ("NORD", "wind"): 300.0,
    ("SUD", "pv"): 9800.0,
    ("SUD", "wind"): 8600.0,
}
TRAINING_SHAPES = (1.8, 2.1, 1.9, 2.2)
FIXED_HOLIDAYS = ("01-01", "01-06", "04-25", "05-01", "06-02", "08-15", "11-01", "12-08", "12-25", "12-26")
EASTER_MONDAYS = ("2008-03-24", "2009-04-13", "2010-04-05")


def holidays() -> list[dt.date]:
    out = [dt.date.fromisoformat(f"{y}-{md}") for y in range(2008, 2011) for md in FIXED_HOLIDAYS]
    out += [dt.date.fromisoformat(d) for d in EASTER_MONDAYS]
    return sorted(out)


def cycles() -> np.ndarray:
    """Composite daily cycles (3, 24) with mean 1: work, sat, off."""
    h = np.arange(24) + 0.5
    base = 1 - 0.22 * np.cos(2 * np.pi * (h - 3) / 24)
    peaks = 0.12 * np.exp(-((h - 11) / 2.5) ** 2) + 0.10 * np.exp(-((h - 19) / 2.0) ** 2)
    shapes = [base + peaks, base + 0.6 * peaks, 0.95 * base + 0.4 * peaks]
    return np.array([s / s.mean() for s in shapes])


def _ar1(rng, n, phi, sd):
    e = rng.normal(0.0, sd * np.sqrt(1 - phi * phi), n)
    out = np.empty(n)
    out[0] = rng.normal(0.0, sd)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + e[i]
    return out


def climate(seed: int = 0):
    """Daily climate arrays keyed by variable name, each (n_days, 4)."""
    days = np.arange(FIRST_DAY, LAST_DAY + 1)
    n = days.size
    doy = (days - days.astype("datetime64[Y]")).astype(int) + 1
    season = np.cos(2 * np.pi * (doy - 200) / 365.25)  # +1 in July
    lat = np.array([p.lat for p in POINTS])
    lon = np.array([p.lon for p in POINTS])
    temp, wind, kt, pres, hum = (np.empty((n, len(POINTS))) for _ in range(5))
    for z in ZONES:
        rng = derive_rng(seed, f"toy-climate/{z}")
        t_mean, t_amp, w_base = CLIMATE[z]
        t_anom = _ar1(rng, n, 0.75, 2.6)
        w_anom = _ar1(rng, n, 0.5, 0.35)
        k_anom = _ar1(rng, n, 0.3, 0.12)
        for j, p in enumerate(POINTS):
            if p.zone != z:
                continue
            temp[:, j] = t_mean + t_amp * season + t_anom + rng.normal(0, 0.4, n) + KELVIN
            wind[:, j] = w_base * np.exp(-0.12 * season + w_anom + rng.normal(0, 0.15, n))
            kt[:, j] = np.clip(0.52 + 0.12 * season + k_anom + rng.normal(0, 0.04, n), 0.05, 0.8)
            pres[:, j] = 100800 + rng.normal(0, 600, n)
            hum[:, j] = np.clip(0.007 + 0.004 * season + rng.normal(0, 0.001, n), 0.001, 0.02)
    _, i0_mean = daily_extraterrestrial(days, lat, lon)
    return days, {
        "temperature": temp,
        "wind": wind,
        "irradiance": kt * i0_mean,
        "pressure": pres,
        "humidity": hum,
    }


def training_wind(seed: int = 0) -> np.ndarray:
    """Hourly 10 m speeds for the training window, (TRAINING_DAYS*24, 4)."""
    rng = derive_rng(seed, "toy-training")
    corr = np.array([[1.0, 0.7, 0.3, 0.2],
                     [0.7, 1.0, 0.35, 0.25],
                     [0.3, 0.35, 1.0, 0.6],
                     [0.2, 0.25, 0.6, 1.0]])
    z = rng.standard_normal((TRAINING_DAYS * 24, 4)) @ np.linalg.cholesky(corr).T
    k = np.array(TRAINING_SHAPES)
    return 5.0 * (-special.log_ndtr(-z)) ** (1 / k)


def demand(days, temperature, seed: int = 0) -> dict[str, np.ndarray]:
    """Hourly demand per zone generated by the demand model plus noise."""
    kinds = day_types(days, holidays())
    block = np.array([DAY_TYPES.index(k) for k in kinds])
    cyc = cycles()
    out = {}
    for z in ZONES:
        rng = derive_rng(seed, f"toy-demand/{z}")
        cols = [j for j, p in enumerate(POINTS) if p.zone == z]
        t_zone = temperature[:, cols].mean(axis=1) - KELVIN
        level = design_matrix(t_zone, kinds, T_HEAT, T_COOL) @ np.array(COEFFICIENTS[z])
        hourly = level[:, None] * cyc[block] * (1 + rng.normal(0, 0.01, (days.size, 24)))
        out[z] = np.round(hourly.ravel(), 3)
    return out


def _write_wide(path, times, ids, values):
    atomic_write_rows(path, ["time", *ids],
                      ([format_time(t), *map(format_float, row)] for t, row in zip(times, values)))


CONFIG_TEMPLATE = """\
[study]
zones = NORD, SUD
technologies = pv, wind
seed = {seed}
gridpoints = gridpoints.csv
holidays = holidays.csv
cf_targets = cf_targets.csv
period = 2009..2010

[wind]
speed = wind_speed_daily.csv
sampling = daily
temperature = temperature_daily.csv
pressure = pressure_daily.csv
humidity = humidity_daily.csv
training = wind_speed_training.csv

[pv]
irradiance = irradiance_daily.csv
temperature = temperature_daily.csv
wind = wind_speed_daily.csv

[demand]
observations = demand_observed.csv
temperature = temperature_daily.csv
cv_blocks = 3
mode = sampled

[optimizer]
step = 0.01
mu_max_cap = 1.0
strategies = all

[analysis]
mix = mix_prescribed.csv
"""


def make_toy(directory, seed: int = 0) -> Path:
    """Write the toy study into ``directory`` and return the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ids = [p.gridpoint_id for p in POINTS]
    atomic_write_rows(directory / "gridpoints.csv", ["gridpoint_id", "lat", "lon", "zone"],
                      ([p.gridpoint_id, format_float(p.lat), format_float(p.lon), p.zone] for p in POINTS))
    days, clim = climate(seed)
    _write_wide(directory / "temperature_daily.csv", days, ids, clim["temperature"])
    _write_wide(directory / "wind_speed_daily.csv", days, ids, clim["wind"])
    _write_wide(directory / "irradiance_daily.csv", days, ids, clim["irradiance"])
    _write_wide(directory / "pressure_daily.csv", days, ids, clim["pressure"])
    _write_wide(directory / "humidity_daily.csv", days, ids, clim["humidity"])
    hours = FIRST_DAY.astype("datetime64[h]") + np.arange(TRAINING_DAYS * 24)
    _write_wide(directory / "wind_speed_training.csv", hours, ids, training_wind(seed))

    load = demand(days, clim["temperature"], seed)
    all_hours = FIRST_DAY.astype("datetime64[h]") + np.arange(days.size * 24)
    stamps = [format_time(t) for t in all_hours]
    atomic_write_rows(directory / "demand_observed.csv", ["time", "zone", "demand_mw"],
                      ([stamps[i], z, format_float(load[z][i])] for i in range(all_hours.size) for z in ZONES))
    atomic_write_rows(directory / "holidays.csv", ["date"], ([d.isoformat()] for d in holidays()))
    atomic_write_rows(directory / "cf_targets.csv", ["zone", "technology", "mean_cf"],
                      ([z, t, format_float(v)] for (z, t), v in CF_TARGETS.items()))
    atomic_write_rows(directory / "mix_prescribed.csv", ["zone", "technology", "capacity_mw"],
                      ([z, t, format_float(v)] for (z, t), v in PRESCRIBED_MIX.items()))
    cfg = directory / "study.ini"
    atomic_write_text(cfg, CONFIG_TEMPLATE.format(seed=seed))
    return cfg
