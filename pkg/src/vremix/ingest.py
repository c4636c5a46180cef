"""CSV readers and writers for climate grids and zonal observations.

All files are UTF-8, comma separated, with a header row. Times are UTC:
``YYYY-MM-DD`` for daily data and ``YYYY-MM-DDTHH:MM`` (or with a space
instead of ``T``) for hourly data.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import HOUR, HourlySeries
from .errors import ConfigError, GapError, ParseError, ValidationError


class Variable(Enum):
    WIND_SPEED_10M = "wind_speed_10m"
    WIND_U = "wind_u"
    WIND_V = "wind_v"
    TEMPERATURE_2M = "temperature_2m"
    SURFACE_PRESSURE = "surface_pressure"
    SPECIFIC_HUMIDITY = "specific_humidity"
    SURFACE_IRRADIANCE = "surface_irradiance"


UNITS = {
    Variable.WIND_SPEED_10M: "m/s",
    Variable.WIND_U: "m/s",
    Variable.WIND_V: "m/s",
    Variable.TEMPERATURE_2M: "K",
    Variable.SURFACE_PRESSURE: "Pa",
    Variable.SPECIFIC_HUMIDITY: "kg/kg",
    Variable.SURFACE_IRRADIANCE: "W/m2",
}


class Sampling(Enum):
    HOURLY = "hourly"
    DAILY = "daily"

    @property
    def unit(self):
        return "h" if self is Sampling.HOURLY else "D"


@dataclass(frozen=True)
class GridPoint:
    gridpoint_id: str
    lat: float
    lon: float
    zone: str


@dataclass(frozen=True)
class GridSeries:
    """Values of one climate variable on a common time axis.

    ``values`` has shape (n_times, n_gridpoints); ``times`` is
    ``datetime64[D]`` for daily sampling and ``datetime64[h]`` for hourly.
    """

    variable: Variable
    sampling: Sampling
    times: np.ndarray = field(repr=False)
    gridpoint_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        times = np.asarray(self.times).astype(f"datetime64[{self.sampling.unit}]")
        values = np.array(self.values, dtype=float)
        ids = tuple(self.gridpoint_ids)
        if values.shape != (times.size, len(ids)):
            raise ValidationError(
                f"values shape {values.shape} does not match "
                f"{times.size} times x {len(ids)} gridpoints"
            )
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate gridpoint id in series header")
        if times.size > 1 and np.any(np.diff(times).astype(np.int64) != 1):
            raise GapError("time axis is not strictly increasing and gap-free")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.variable.value}: non-finite values")
        if self.variable is Variable.SURFACE_IRRADIANCE and np.any(values < 0):
            raise ValidationError("surface irradiance must be nonnegative")
        if self.variable is Variable.SURFACE_PRESSURE and np.any(values <= 0):
            raise ValidationError("surface pressure must be positive")
        if self.variable is Variable.TEMPERATURE_2M and np.any(values <= 0):
            raise ValidationError("temperature must be positive (kelvin)")
        if self.variable is Variable.WIND_SPEED_10M and np.any(values < 0):
            raise ValidationError("wind speed must be nonnegative")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gridpoint_ids", ids)

    @property
    def n_times(self) -> int:
        return self.times.size

    def column(self, gridpoint_id: str) -> np.ndarray:
        return self.values[:, self.gridpoint_ids.index(gridpoint_id)]

    def select(self, gridpoint_ids: Sequence[str]) -> "GridSeries":
        missing = [g for g in gridpoint_ids if g not in self.gridpoint_ids]
        if missing:
            raise ValidationError(f"gridpoints not in series: {missing}")
        cols = [self.gridpoint_ids.index(g) for g in gridpoint_ids]
        return GridSeries(self.variable, self.sampling, self.times,
                          tuple(gridpoint_ids), self.values[:, cols])

    def slice_dates(self, first, last) -> "GridSeries":
        """Restrict to times falling on dates ``first``..``last`` inclusive."""
        days = self.times.astype("datetime64[D]")
        keep = (days >= np.datetime64(first, "D")) & (days <= np.datetime64(last, "D"))
        if not keep.any():
            raise ValidationError(f"no {self.variable.value} data between {first} and {last}")
        return GridSeries(self.variable, self.sampling, self.times[keep],
                          self.gridpoint_ids, self.values[keep])

    def hourly_start(self) -> np.datetime64:
        return self.times[0].astype("datetime64[h]")


def _read_rows(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file, header row required", path) from None
    header = [h.strip() for h in header]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, got {len(row)}", path, lineno
            )
        rows.append((lineno, [c.strip() for c in row]))
    return path, header, rows


def _float(text, path, lineno, name):
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} in column {name}", path, lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value {text!r} in column {name}", path, lineno)
    return value


def _expect_header(path, header, expected):
    if header != list(expected):
        raise ParseError(f"header must be {','.join(expected)}; got {','.join(header)}", path, 1)


def load_grid_metadata(path, zones: Iterable[str] | None = None) -> list[GridPoint]:
    """Read ``gridpoint_id,lat,lon,zone`` rows.

    If ``zones`` is given, rows naming any other zone are rejected.
    """
    path, header, rows = _read_rows(path)
    _expect_header(path, header, ["gridpoint_id", "lat", "lon", "zone"])
    allowed = None if zones is None else set(zones)
    seen = set()
    points = []
    for lineno, (gid, lat, lon, zone) in rows:
        if not gid:
            raise ValidationError(f"{path}:{lineno}: gridpoint_id is empty")
        if gid in seen:
            raise ValidationError(f"{path}:{lineno}: duplicate gridpoint_id {gid!r}")
        lat = _float(lat, path, lineno, "lat")
        lon = _float(lon, path, lineno, "lon")
        if not -90 <= lat <= 90:
            raise ValidationError(f"{path}:{lineno}: lat out of range ({lat})")
        if not -180 <= lon <= 180:
            raise ValidationError(f"{path}:{lineno}: lon out of range ({lon})")
        if not zone:
            raise ValidationError(f"{path}:{lineno}: zone is empty")
        if allowed is not None and zone not in allowed:
            raise ValidationError(f"{path}:{lineno}: unknown zone {zone!r}")
        seen.add(gid)
        points.append(GridPoint(gid, lat, lon, zone))
    if not points:
        raise ValidationError(f"{path}: no gridpoints")
    return points


def parse_time(text, sampling: Sampling, path=None, lineno=None) -> np.datetime64:
    text = text.strip().replace(" ", "T")
    try:
        if sampling is Sampling.DAILY:
            if len(text) != 10:
                raise ValueError
            return np.datetime64(text, "D")
        if len(text) == 10:
            raise ValueError
        t = np.datetime64(text.rstrip("Z"))
        h = t.astype("datetime64[h]")
        if h != t:
            raise ParseError(f"timestamp {text!r} is not on the hour", path, lineno)
        return h
    except ValueError:
        raise ParseError(
            f"bad {sampling.value} timestamp {text!r}", path, lineno
        ) from None


def _check_gaps(times, unit, path):
    if times.size < 2:
        return
    step = np.diff(times).astype(np.int64)
    if np.any(step <= 0):
        i = int(np.flatnonzero(step <= 0)[0])
        raise ParseError(f"time axis not strictly increasing at {times[i + 1]}", path)
    if np.any(step != 1):
        full = np.arange(times[0], times[-1] + np.timedelta64(1, unit))
        missing = np.setdiff1d(full, times)
        shown = ", ".join(str(m) for m in missing[:10])
        more = "" if missing.size <= 10 else f" (+{missing.size - 10} more)"
        raise GapError(f"{path}: missing time stamps {shown}{more}", missing)


def _read_wide(path, sampling: Sampling):
    path, header, rows = _read_rows(path)
    if not header or header[0] != "time" or len(header) < 2:
        raise ParseError("header must be time,<name>,...", path, 1)
    ids = tuple(header[1:])
    if not rows:
        raise ParseError("no data rows", path)
    times = np.empty(len(rows), dtype=f"datetime64[{sampling.unit}]")
    values = np.empty((len(rows), len(ids)))
    for i, (lineno, row) in enumerate(rows):
        times[i] = parse_time(row[0], sampling, path, lineno)
        for j, cell in enumerate(row[1:]):
            values[i, j] = _float(cell, path, lineno, ids[j])
    _check_gaps(times, sampling.unit, path)
    return times, ids, values


def load_grid_series(path, variable: Variable | str, sampling: Sampling | str) -> GridSeries:
    """Read a ``time,<gridpoint_1>,...,<gridpoint_M>`` file."""
    variable = Variable(variable)
    sampling = Sampling(sampling)
    times, ids, values = _read_wide(path, sampling)
    return GridSeries(variable, sampling, times, ids, values)


def combine_wind_components(u: GridSeries, v: GridSeries) -> GridSeries:
    """Wind speed sqrt(u^2 + v^2) from aligned component series."""
    if (u.sampling is not v.sampling or u.gridpoint_ids != v.gridpoint_ids
            or u.n_times != v.n_times or np.any(u.times != v.times)):
        raise ValidationError("u and v wind components are not aligned")
    return GridSeries(Variable.WIND_SPEED_10M, u.sampling, u.times, u.gridpoint_ids,
                      np.hypot(u.values, v.values))


def format_float(x: float) -> str:
    """Shortest round-tripping representation (bit-exact on re-read)."""
    return repr(float(x))


def format_time(t: np.datetime64) -> str:
    t = np.datetime64(t)
    if t.dtype == np.dtype("datetime64[D]"):
        return str(t)
    return str(t.astype("datetime64[m]"))


def atomic_write_rows(path, header: Sequence[str], rows: Iterable[Sequence]):
    """Write a CSV file via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_grid_series(path, series: GridSeries):
    rows = ([format_time(t)] + [format_float(x) for x in row]
            for t, row in zip(series.times, series.values))
    atomic_write_rows(path, ["time", *series.gridpoint_ids], rows)


def check_gridpoints(series: GridSeries, metadata: Sequence[GridPoint]):
    known = {p.gridpoint_id for p in metadata}
    missing = [g for g in series.gridpoint_ids if g not in known]
    if missing:
        raise ValidationError(
            f"{series.variable.value} references gridpoints absent from metadata: {missing}"
        )


def load_demand_observations(path) -> dict[str, HourlySeries]:
    """Hourly zonal demand from ``time,zone,demand_mw`` rows."""
    path, header, rows = _read_rows(path)
    _expect_header(path, header, ["time", "zone", "demand_mw"])
    per_zone: dict[str, tuple[list, list]] = {}
    for lineno, (t, zone, value) in rows:
        t = parse_time(t, Sampling.HOURLY, path, lineno)
        value = _float(value, path, lineno, "demand_mw")
        if value <= 0:
            raise ValidationError(f"{path}:{lineno}: demand must be positive ({value})")
        times, values = per_zone.setdefault(zone, ([], []))
        times.append(t)
        values.append(value)
    out = {}
    for zone, (times, values) in per_zone.items():
        times = np.array(times, dtype="datetime64[h]")
        order = np.argsort(times, kind="stable")
        times = times[order]
        _check_gaps(times, "h", f"{path} [zone {zone}]")
        out[zone] = HourlySeries(times[0], np.asarray(values)[order])
    if not out:
        raise ValidationError(f"{path}: no demand rows")
    return out


def _load_zone_tech_table(path, column, check):
    path, header, rows = _read_rows(path)
    _expect_header(path, header, ["zone", "technology", column])
    table = {}
    for lineno, (zone, tech, value) in rows:
        value = _float(value, path, lineno, column)
        problem = check(value)
        if problem:
            raise ValidationError(f"{path}:{lineno}: {column} {problem} ({value})")
        if (zone, tech) in table:
            raise ValidationError(f"{path}:{lineno}: duplicate row for {zone},{tech}")
        table[(zone, tech)] = value
    return table


def load_cf_targets(path) -> dict[tuple[str, str], float]:
    """Observed mean capacity factors from ``zone,technology,mean_cf`` rows."""
    return _load_zone_tech_table(
        path, "mean_cf", lambda v: None if 0 < v < 1 else "must lie in (0, 1)")


def load_capacities(path) -> dict[tuple[str, str], float]:
    """Installed capacities from ``zone,technology,capacity_mw`` rows."""
    return _load_zone_tech_table(
        path, "capacity_mw", lambda v: None if v >= 0 else "must be nonnegative")


def load_zonal_observations(path, kind: str):
    loaders = {
        "demand": load_demand_observations,
        "capacity_factor_mean": load_cf_targets,
        "capacities": load_capacities,
    }
    try:
        return loaders[kind](path)
    except KeyError:
        raise ConfigError(f"unknown observation kind {kind!r}") from None


def load_holidays(path) -> frozenset:
    """Holiday calendar: a ``date`` header followed by one ISO date per row."""
    path, header, rows = _read_rows(path)
    _expect_header(path, header, ["date"])
    out = set()
    for lineno, (text,) in rows:
        try:
            out.add(dt.date.fromisoformat(text))
        except ValueError:
            raise ParseError(f"bad date {text!r}", path, lineno) from None
    return frozenset(out)


def load_hourly_table(path) -> dict[str, HourlySeries]:
    """Generic wide hourly file ``time,<name_1>,...`` keyed by column name."""
    times, ids, values = _read_wide(path, Sampling.HOURLY)
    return {name: HourlySeries(times[0], values[:, j]) for j, name in enumerate(ids)}


def write_zonal_series(path, series: dict, value_column: str):
    """Long-format hourly output.

    ``series`` maps a key (zone, or (zone, technology)) to an HourlySeries;
    rows are ordered by time, then by key insertion order.
    """
    keys = list(series)
    first = series[keys[0]]
    for k in keys[1:]:
        if not series[k].aligned_with(first):
            raise ValidationError("zonal series to write are not aligned")
    if isinstance(keys[0], tuple):
        header = ["time", "zone", "technology", value_column]
    else:
        header = ["time", "zone", value_column]
    times = [format_time(t) for t in first.times]

    def rows():
        for i, t in enumerate(times):
            for k in keys:
                key = list(k) if isinstance(k, tuple) else [k]
                yield [t, *key, format_float(series[k].values[i])]

    atomic_write_rows(path, header, rows())


def load_capacity_factor_series(path) -> dict[tuple[str, str], HourlySeries]:
    """Read ``time,zone,technology,cf`` rows written by :func:`write_zonal_series`."""
    path, header, rows = _read_rows(path)
    _expect_header(path, header, ["time", "zone", "technology", "cf"])
    per_key: dict[tuple[str, str], tuple[list, list]] = {}
    for lineno, (t, zone, tech, value) in rows:
        t = parse_time(t, Sampling.HOURLY, path, lineno)
        value = _float(value, path, lineno, "cf")
        if value < 0 or value > 1:
            raise ValidationError(f"{path}:{lineno}: cf outside [0, 1] ({value})")
        times, values = per_key.setdefault((zone, tech), ([], []))
        times.append(t)
        values.append(value)
    out = {}
    for key, (times, values) in per_key.items():
        times = np.array(times, dtype="datetime64[h]")
        _check_gaps(times, "h", f"{path} [{key[0]},{key[1]}]")
        out[key] = HourlySeries(times[0], values)
    if not out:
        raise ValidationError(f"{path}: no capacity-factor rows")
    return out


def hourly_times(start: np.datetime64, n: int) -> np.ndarray:
    return np.datetime64(start, "h") + np.arange(n) * HOUR
