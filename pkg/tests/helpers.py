"""Synthetic fixtures shared by several test modules."""

import numpy as np

from vremix.core import DAY_TYPES, HourlySeries, day_types
from vremix.demand import ZoneTemperatures, design_matrix

COEF = np.array([420.0, 880.0, 19000.0, 350.0, 700.0, 15500.0, 300.0, 610.0, 12800.0])


def cycles():
    h = np.arange(24) + 0.5
    base = 1 - 0.2 * np.cos(2 * np.pi * (h - 3) / 24)
    shapes = np.stack([base + 0.1 * np.exp(-((h - 11) / 2.5) ** 2),
                       base + 0.05 * np.exp(-((h - 12) / 3.0) ** 2),
                       0.9 * base + 0.05])
    return shapes / shapes.mean(axis=1, keepdims=True)


def synthetic_demand(years, noise_frac=0.0, t_heat=9.5, t_cool=13.0, seed=0, holidays=(),
                     coef=COEF, first="2001-01-01", noise_on="hourly"):
    """Daily temperatures and hourly demand drawn from the demand model itself.

    ``noise_frac`` adds Gaussian noise with a standard deviation of that
    fraction of the mean demand, independently per hour (as in sampled
    prediction) or, with ``noise_on="daily"``, to the daily level.
    """
    rng = np.random.default_rng(seed)
    first = np.datetime64(first, "D")
    dates = first + np.arange(int(round(365.25 * years)))
    doy = (dates - dates.astype("datetime64[Y]")).astype(int)
    t = 14.0 + 10.0 * np.cos(2 * np.pi * (doy - 200) / 365.25) + rng.normal(0, 2.5, dates.size)
    kinds = day_types(dates, frozenset(holidays))
    level = design_matrix(t, kinds, t_heat, t_cool) @ coef
    sd = noise_frac * level.mean()
    if noise_on == "daily":
        level = level + rng.normal(0, sd, level.size)
    block = np.array([DAY_TYPES.index(k) for k in kinds])
    hourly = (level[:, None] * cycles()[block]).ravel()
    if noise_on == "hourly":
        hourly = hourly + rng.normal(0, sd, hourly.size)
    temps = ZoneTemperatures(dates, ("Z",), t[:, None])
    return temps, {"Z": HourlySeries(first.astype("datetime64[h]"), hourly)}


def ray_dataset(n_hours=8760, seed=0):
    """Capacity factors for 2 zones x 2 technologies plus total demand."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_hours)
    day = np.clip(np.sin(2 * np.pi * (t % 24 - 6) / 24), 0, None)
    season = 1 + 0.3 * np.cos(2 * np.pi * t / 8760)
    shared = rng.normal(size=n_hours)
    cf = {
        ("N", "pv"): np.clip(0.6 * day * season * (0.8 + 0.2 * rng.random(n_hours)), 0, 1),
        ("N", "wind"): np.clip(0.25 + 0.1 * shared + 0.08 * rng.normal(size=n_hours), 0, 1),
        ("S", "pv"): np.clip(0.7 * day * season * (0.7 + 0.3 * rng.random(n_hours)), 0, 1),
        ("S", "wind"): np.clip(0.3 - 0.05 * shared + 0.1 * rng.normal(size=n_hours), 0, 1),
    }
    demand = 30000 + 5000 * np.sin(2 * np.pi * (t % 24 - 9) / 24) + 1000 * rng.normal(size=n_hours)
    start = np.datetime64("2010-01-01T00")
    return {k: HourlySeries(start, v) for k, v in cf.items()}, HourlySeries(start, demand)
