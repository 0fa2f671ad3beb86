"""Flat ``key = value`` experiment configs.

Lists are comma-separated.  Blank lines and lines starting with ``#`` are
ignored.  Unknown keys, duplicate keys and malformed values are errors that
name the offending key.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .census import THICK, THIN

SUITES = ("census", "late", "extremes", "excursions", "gff-check", "green-check")
SIGNS = (THICK, THIN, "both")


class ConfigParse(ValueError):
    def __init__(self, key: Optional[str], message: str):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


@dataclass(frozen=True)
class ExperimentConfig:
    N_list: tuple
    theta: float = 1.0
    eta_list: tuple = (0.5,)
    replicas: int = 1
    seed: int = 0
    output_path: str = "loctime_run"
    suites: tuple = ("census",)
    sign: str = THICK
    workers: int = 1
    # excursion census
    depth: int = 3
    R0: float = 16.0
    rho: float = 2.0
    # GFF and Green checks
    t: float = 20.0
    radii: tuple = (4.0, 8.0, 16.0, 32.0)
    quantiles: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)

    def __post_init__(self):
        if not self.N_list:
            raise ConfigParse("N_list", "must be nonempty")
        if any(n < 2 for n in self.N_list):
            raise ConfigParse("N_list", "every N must be at least 2")
        if not self.eta_list:
            raise ConfigParse("eta_list", "must be nonempty")
        if any(not e > 0 for e in self.eta_list):
            raise ConfigParse("eta_list", "every eta must be positive")
        if not self.theta > 0:
            raise ConfigParse("theta", "must be positive")
        if self.replicas < 1:
            raise ConfigParse("replicas", "must be at least 1")
        if self.seed < 0:
            raise ConfigParse("seed", "must be nonnegative")
        if self.workers < 1:
            raise ConfigParse("workers", "must be at least 1")
        if not self.suites:
            raise ConfigParse("suites", "must be nonempty")
        for s in self.suites:
            if s not in SUITES:
                raise ConfigParse("suites", f"unknown suite {s!r}; choose from {', '.join(SUITES)}")
        if self.sign not in SIGNS:
            raise ConfigParse("sign", f"must be one of {', '.join(SIGNS)}")

    @property
    def signs(self) -> tuple:
        return (THICK, THIN) if self.sign == "both" else (self.sign,)

    def echo(self) -> dict:
        """Plain, JSON-ready view in field order."""
        return {f.name: list(v) if isinstance(v := getattr(self, f.name), tuple) else v
                for f in fields(self)}


def _int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigParse(key, f"expected an integer, got {text!r}") from None


def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigParse(key, f"expected a number, got {text!r}") from None


def _list(conv):
    def parse(key, text):
        items = [s.strip() for s in text.split(",")]
        if not items or any(s == "" for s in items):
            raise ConfigParse(key, f"malformed list {text!r}")
        return tuple(conv(key, s) for s in items)
    return parse


def _str(key, text):
    if not text:
        raise ConfigParse(key, "empty value")
    return text


_PARSERS = {
    "N_list": _list(_int),
    "theta": _float,
    "eta_list": _list(_float),
    "replicas": _int,
    "seed": _int,
    "output_path": _str,
    "suites": _list(lambda k, s: s),
    "sign": _str,
    "workers": _int,
    "depth": _int,
    "R0": _float,
    "rho": _float,
    "t": _float,
    "radii": _list(_float),
    "quantiles": _list(_float),
}
_REQUIRED = ("N_list",)


def parse_config_text(text: str) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigParse(None, f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in _PARSERS:
            raise ConfigParse(key, f"unknown key (line {lineno})")
        if key in values:
            raise ConfigParse(key, f"duplicate key (line {lineno})")
        values[key] = _PARSERS[key](key, val)
    for key in _REQUIRED:
        if key not in values:
            raise ConfigParse(key, "missing required key")
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(None, f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text)
