"""Run configuration: sectioned INI files with command-line overrides.

Every key has a default, so an empty (or absent) file is a valid
configuration.  The resolved configuration is hashed for provenance.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .dynamics import DEFAULT_ABS_TOL, DEFAULT_REL_TOL


class ConfigError(ValueError):
    pass


def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


@dataclass
class RunSection:
    atom: str = "rb87"
    out: str = "out"
    cache_dir: str = ""
    jobs: int = 1
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL


@dataclass
class MapSection:
    family: str = "first_order_bs"
    durations_us: tuple = (1.0, 60.0)
    points_per_decade: int = 40
    widths: tuple = (0.005, 0.2, 20)
    width_cut: float = 0.2


@dataclass
class ThirdOrderSection:
    # empty alpha/beta means: optimize per map cell
    alpha: str = ""
    beta: str = ""
    width_scale: float = 1.0
    max_evals: int = 400


@dataclass
class DurationsSection:
    """Pulse durations (microseconds) used by the compare/sequence/interferometer runs."""

    first_order_us: float = 8.8
    box_us: float = 30.7
    third_order_us: float = 13.3
    mirror_us: float = 17.97


@dataclass
class CompareSection:
    widths: tuple = (0.005, 0.2, 8)


@dataclass
class InterferometerSection:
    width: float = 0.05
    separation_time_s: float = 0.0
    fringe_points: int = 64
    phase_reference: str = "start"
    map_durations_us: tuple = ()
    map_widths: tuple = ()


@dataclass
class AveragingSection:
    amplitudes: tuple = (0.1, 0.2, 0.3)
    tolerance: float = 0.02
    n_max: int = 7


@dataclass
class OptimizeSection:
    target: str = "bs"
    duration_us: float = 13.3
    width: float = 0.05


_SECTIONS = {
    "run": RunSection,
    "efficiency_map": MapSection,
    "third_order": ThirdOrderSection,
    "durations": DurationsSection,
    "compare": CompareSection,
    "interferometer": InterferometerSection,
    "averaging": AveragingSection,
    "optimize": OptimizeSection,
}


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    efficiency_map: MapSection = field(default_factory=MapSection)
    third_order: ThirdOrderSection = field(default_factory=ThirdOrderSection)
    durations: DurationsSection = field(default_factory=DurationsSection)
    compare: CompareSection = field(default_factory=CompareSection)
    interferometer: InterferometerSection = field(default_factory=InterferometerSection)
    averaging: AveragingSection = field(default_factory=AveragingSection)
    optimize: OptimizeSection = field(default_factory=OptimizeSection)

    def validate(self):
        if not (self.run.rel_tol > 0 and self.run.abs_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.run.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if len(self.efficiency_map.durations_us) != 2:
            raise ConfigError("efficiency_map.durations_us needs 'lo, hi'")
        for name, spec in (("efficiency_map.widths", self.efficiency_map.widths),
                           ("compare.widths", self.compare.widths)):
            if len(spec) != 3 or spec[2] < 1 or spec[0] <= 0:
                raise ConfigError(f"{name} needs 'lo, hi, count' with positive values")
        if self.interferometer.phase_reference not in ("start", "center"):
            raise ConfigError("interferometer.phase_reference must be 'start' or 'center'")
        if bool(self.third_order.alpha) != bool(self.third_order.beta):
            raise ConfigError("third_order.alpha and beta must be given together")
        return self

    def to_dict(self):
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}

    def hash(self):
        """SHA-256 of the settings that influence results (not paths or jobs)."""
        data = self.to_dict()
        for key in ("out", "cache_dir", "jobs"):
            data["run"].pop(key)
        blob = json.dumps(data, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()


def _convert(value, default):
    if isinstance(default, bool):
        return str(value).strip().lower() in ("1", "yes", "true", "on")
    if isinstance(default, int):
        return int(float(value))
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return _floats(value)
    return str(value).strip()


def load_config(path=None, overrides=None) -> RunConfig:
    """Read ``path`` (INI) and apply ``overrides`` of the form
    ``{"section.key": value}``; unknown sections or keys are errors."""
    config = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not parser.read(Path(path)):
            raise ConfigError(f"cannot read config file {path}")
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown config section [{section}]")
            _apply(getattr(config, section), section, dict(parser[section]))
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, sep, key = dotted.partition(".")
        if not sep or section not in _SECTIONS:
            raise ConfigError(f"unknown config key {dotted!r}")
        _apply(getattr(config, section), section, {key: value})
    return config.validate()


def _apply(target, section, values):
    known = {f.name: f for f in fields(target)}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        default = getattr(type(target)(), key)
        try:
            setattr(target, key, _convert(raw, default) if isinstance(raw, str) else raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key}: {exc}") from exc
