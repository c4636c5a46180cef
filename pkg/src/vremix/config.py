"""INI study configuration.

Relative file paths are resolved against the directory of the config file.
Recognised sections: ``study``, ``wind``, ``pv``, ``demand``, ``optimizer``
and ``analysis``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

SECTIONS = ("study", "wind", "pv", "demand", "optimizer", "analysis")


@dataclass(frozen=True)
class StudyConfig:
    path: Path
    parser: configparser.ConfigParser

    @property
    def root(self) -> Path:
        return self.path.parent

    def get(self, section: str, key: str, default=None) -> str | None:
        if self.parser.has_option(section, key):
            value = self.parser.get(section, key).strip()
            return value if value != "" else default
        return default

    def require(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None:
            raise ConfigError(f"{self.path}: missing [{section}] {key}")
        return value

    def file(self, section: str, key: str, required: bool = True) -> Path | None:
        value = self.require(section, key) if required else self.get(section, key)
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.root / p

    def float(self, section: str, key: str, default: float | None = None) -> float | None:
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not a number: {value!r}") from None

    def int(self, section: str, key: str, default: int | None = None) -> int | None:
        value = self.get(section, key)
        if value is None:
            return default
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"[{section}] {key}: not an integer: {value!r}") from None

    def bool(self, section: str, key: str, default: bool = False) -> bool:
        if not self.parser.has_option(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from None

    def list(self, section: str, key: str, default=()) -> tuple[str, ...]:
        value = self.get(section, key)
        if value is None:
            return tuple(default)
        return tuple(v.strip() for v in value.split(",") if v.strip())

    def grid(self, section: str, key: str, default):
        """``start:stop:step`` (inclusive) or a comma-separated list of numbers."""
        value = self.get(section, key)
        if value is None:
            return tuple(default)
        try:
            if ":" in value:
                start, stop, step = (float(v) for v in value.split(":"))
                if step <= 0:
                    raise ValueError("step must be positive")
                n = int(np.floor((stop - start) / step + 1e-9))
                return tuple(float(np.round(start + i * step, 10)) for i in range(n + 1))
            return tuple(float(v) for v in value.split(","))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: bad grid {value!r} ({exc})") from None

    def section(self, name: str) -> dict[str, str]:
        return dict(self.parser.items(name)) if self.parser.has_section(name) else {}

    def snapshot(self) -> dict[str, dict[str, str]]:
        return {s: dict(self.parser.items(s)) for s in self.parser.sections()}


def load_config(path) -> StudyConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"{path}: unknown sections {unknown}")
    return StudyConfig(path.resolve(), parser)


def parse_period(text: str) -> tuple[np.datetime64, np.datetime64]:
    """``YYYY``, ``YYYY..YYYY`` or ``YYYY-MM-DD..YYYY-MM-DD`` to an inclusive date range."""
    parts = [p.strip() for p in text.split("..")]
    if len(parts) == 1:
        parts = parts * 2
    if len(parts) != 2:
        raise ConfigError(f"bad period {text!r}")
    try:
        first = np.datetime64(parts[0] if len(parts[0]) > 4 else f"{parts[0]}-01-01", "D")
        last = np.datetime64(parts[1] if len(parts[1]) > 4 else f"{parts[1]}-12-31", "D")
    except ValueError:
        raise ConfigError(f"bad period {text!r}") from None
    if first > last:
        raise ConfigError(f"period {text!r} ends before it starts")
    return first, last
