"""Index types, hourly containers, calendar logic and sample statistics."""

from __future__ import annotations

import datetime as dt
import zlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    DomainError,
    EmptySeries,
    InsufficientData,
    ValidationError,
)

HOUR = np.timedelta64(1, "h")
DEFAULT_TECHNOLOGIES = ("pv", "wind")


class DayType(Enum):
    WORK = "work"
    SAT = "sat"
    OFF = "off"


DAY_TYPES = (DayType.WORK, DayType.SAT, DayType.OFF)


def _as_date(value) -> dt.date:
    if isinstance(value, dt.datetime):
        return value.date()
    if isinstance(value, dt.date):
        return value
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]").astype(dt.date)
    return dt.date.fromisoformat(str(value)[:10])


def day_type(date, holidays: Iterable = frozenset()) -> DayType:
    """Classify a calendar date as working day, Saturday or day off.

    Sundays and any date in ``holidays`` are ``OFF``; other Saturdays are
    ``SAT``; everything else is ``WORK``.
    """
    d = _as_date(date)
    if d in holidays or d.weekday() == 6:
        return DayType.OFF
    if d.weekday() == 5:
        return DayType.SAT
    return DayType.WORK


def day_types(dates: np.ndarray, holidays: Iterable = frozenset()) -> np.ndarray:
    """Vectorised :func:`day_type` returning an object array of DayType."""
    holidays = frozenset(_as_date(h) for h in holidays)
    days = np.asarray(dates).astype("datetime64[D]")
    # 1970-01-01 was a Thursday (weekday 3)
    weekday = (days.astype(np.int64) + 3) % 7
    out = np.empty(days.shape, dtype=object)
    out[:] = DayType.WORK
    out[weekday == 5] = DayType.SAT
    out[weekday == 6] = DayType.OFF
    if holidays:
        hol = np.array(sorted(holidays), dtype="datetime64[D]")
        out[np.isin(days, hol)] = DayType.OFF
    return out


def as_hour(value) -> np.datetime64:
    """Coerce a timestamp to ``datetime64[h]``, rejecting sub-hour offsets."""
    if isinstance(value, dt.datetime) and value.tzinfo is not None:
        value = value.astimezone(dt.timezone.utc).replace(tzinfo=None)
    t = np.datetime64(value)
    h = t.astype("datetime64[h]")
    if h != t:
        raise ValidationError(f"timestamp {value} is not aligned to an hour")
    return h


@dataclass(frozen=True)
class ComponentIndex:
    """Ordered (zone, technology) pairs fixing the layout of mix vectors."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple((str(z), str(t)) for z, t in self.pairs)
        for z, t in pairs:
            if not z or not t:
                raise ValidationError("zone and technology names must be non-empty")
        if len(set(pairs)) != len(pairs):
            raise ValidationError("duplicate (zone, technology) pair in index")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def product(cls, zones: Sequence[str], technologies: Sequence[str] = DEFAULT_TECHNOLOGIES):
        return cls(tuple((z, t) for z in zones for t in technologies))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]

    def position(self, zone: str, tech: str) -> int:
        return self.pairs.index((zone, tech))

    @property
    def zones(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(z for z, _ in self.pairs))

    @property
    def technologies(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(t for _, t in self.pairs))

    def labels(self) -> list[str]:
        return [f"{z}_{t}" for z, t in self.pairs]


@dataclass(frozen=True)
class HourlySeries:
    """Gap-free hourly values starting at ``start`` (UTC)."""

    start: np.datetime64
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "start", as_hour(self.start))
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError("hourly series values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValidationError("hourly series contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def end(self) -> np.datetime64:
        """Timestamp of the last value."""
        return self.start + (len(self) - 1) * HOUR

    @property
    def times(self) -> np.ndarray:
        return self.start + np.arange(len(self)) * HOUR

    def aligned_with(self, other: "HourlySeries") -> bool:
        return self.start == other.start and len(self) == len(other)

    def with_values(self, values) -> "HourlySeries":
        return HourlySeries(self.start, values)

    def slice_time(self, first, last) -> "HourlySeries":
        """Restrict to the closed interval [first, last]."""
        i0 = int((as_hour(first) - self.start) / HOUR)
        i1 = int((as_hour(last) - self.start) / HOUR) + 1
        if i0 < 0 or i1 > len(self) or i0 >= i1:
            raise AlignmentError(
                f"requested window {first}..{last} not inside {self.start}..{self.end}"
            )
        return HourlySeries(self.start + i0 * HOUR, self.values[i0:i1])


@dataclass(frozen=True)
class Mix:
    """Installed capacities (MW) laid out along a :class:`ComponentIndex`."""

    index: ComponentIndex
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.shape != (len(self.index),):
            raise ValidationError(
                f"mix has {w.size} entries but index has {len(self.index)}"
            )
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValidationError("capacities must be finite and nonnegative")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)

    def total(self) -> float:
        return float(self.w.sum())

    def as_dict(self) -> dict[tuple[str, str], float]:
        return {k: float(v) for k, v in zip(self.index, self.w)}


def _values(series) -> np.ndarray:
    if isinstance(series, HourlySeries):
        return series.values
    return np.asarray(series, dtype=float)


def sample_mean(series) -> float:
    values = _values(series)
    if values.size == 0:
        raise EmptySeries("cannot take the mean of an empty series")
    return float(values.mean())


def stack_aligned(series: Sequence) -> np.ndarray:
    """Stack series into a K x N array, checking timestamps when available."""
    if isinstance(series, np.ndarray):
        return np.atleast_2d(np.asarray(series, dtype=float))
    series = list(series)
    if not series:
        raise EmptySeries("no series given")
    first = series[0]
    for s in series[1:]:
        if isinstance(first, HourlySeries) and isinstance(s, HourlySeries):
            if not first.aligned_with(s):
                raise AlignmentError(
                    f"series starting {s.start} (n={len(s)}) not aligned with "
                    f"{first.start} (n={len(first)})"
                )
        elif len(_values(s)) != len(_values(first)):
            raise AlignmentError("series have different lengths")
    return np.vstack([_values(s) for s in series])


def sample_covariance(series) -> np.ndarray:
    """Unbiased (N-1) sample covariance of K aligned series."""
    x = stack_aligned(series)
    if x.shape[1] < 2:
        raise InsufficientData("covariance needs at least two samples")
    centred = x - x.mean(axis=1, keepdims=True)
    cov = centred @ centred.T / (x.shape[1] - 1)
    return (cov + cov.T) / 2


def ratio_series(numerator: HourlySeries, demand_total: HourlySeries) -> HourlySeries:
    """Pointwise quotient of a production series by total demand."""
    if not numerator.aligned_with(demand_total):
        raise AlignmentError("numerator and demand series are not aligned")
    bad = np.flatnonzero(demand_total.values <= 0)
    if bad.size:
        raise DomainError(
            f"demand is not strictly positive at {demand_total.times[bad[0]]}"
        )
    return numerator.with_values(numerator.values / demand_total.values)


def stable_label(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Independent generator for a (seed, key...) tuple.

    String keys are hashed with CRC32 so sub-streams are stable across runs
    and independent of scheduling order.
    """
    entropy = [int(seed)]
    for k in keys:
        entropy.append(stable_label(k) if isinstance(k, str) else int(k))
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class GridPower:
    """Hourly power per gridpoint, shape (n_hours, n_gridpoints), in W per unit."""

    start: np.datetime64
    gridpoint_ids: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "start", as_hour(self.start))
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != len(self.gridpoint_ids):
            raise ValidationError("power array must be (n_hours, n_gridpoints)")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gridpoint_ids", tuple(self.gridpoint_ids))

    @property
    def n_hours(self) -> int:
        return self.values.shape[0]
