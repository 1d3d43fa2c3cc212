"""Run configuration: TOML loading, device presets, and validation.

A run file holds five optional tables: problem (schedule and step count),
device (preset name or explicit parameters), grape (optimizer settings and
pulse durations), sampling (shots and seed counts), and sweep (lists for
the study commands).  Anything omitted falls back to the defaults below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .transmon import DeviceParams

__all__ = [
    "DEVICE_PRESETS",
    "ExperimentConfig",
    "device_from_config",
    "load_config",
    "preset_device",
]

# Calibration snapshot per backend: relaxation/dephasing times in
# microseconds and the entangling/full-step implementation times in ns.
DEVICE_PRESETS = {
    "belem": {
        "t1": (102.6, 70.4),
        "t2": (127.3, 104.5),
        "tau_cnot": 810.7,
        "tau_step": 2500.0,
    },
    "casablanca": {
        "t1": (111.7, 130.1),
        "t2": (40.7, 102.2),
        "tau_cnot": 760.9,
        "tau_step": 2400.0,
    },
    "lima": {
        "t1": (101.6, 113.0),
        "t2": (180.0, 106.9),
        "tau_cnot": 305.8,
        "tau_step": 1000.0,
    },
    "manila": {
        "t1": (136.0, 244.2),
        "t2": (112.8, 46.7),
        "tau_cnot": 277.3,
        "tau_step": 900.0,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated union of all run settings."""

    total_time: float = 20.0
    steps: int = 20
    node_rule: str = "midpoint"
    schedule_form: str = "cos2"
    preset: str | None = "belem"
    alpha: float = 200.0
    g: float = 3.0
    levels: int = 3
    t1: tuple = (np.inf, np.inf)
    t2: tuple = (np.inf, np.inf)
    noise_enabled: bool = True
    eps_cut: float = 30.0
    chi: float = 1.0e-3
    penalty_exponent: int = 3
    max_iterations: int = 500
    target_infidelity: float = 1.0e-4
    init_amplitude: float = 0.5
    seed: int = 7
    tau: float = 120.0
    shots: int = 2500
    sample_seeds: int = 100
    mitigation: bool = True
    total_times: tuple = (4.0, 8.0, 16.0, 20.0)
    step_counts: tuple = (5, 10, 20)
    taus: tuple = (120.0,)
    presets: tuple = ("belem",)
    modes: tuple = ("120",)
    shot_grid: tuple = (10, 100, 1000, 10**4, 10**5, 10**6)
    source: str = "ideal"

    def __post_init__(self) -> None:
        if self.preset is not None and self.preset not in DEVICE_PRESETS:
            raise ConfigError("unknown device preset %r" % (self.preset,))
        for name in self.presets:
            if name not in DEVICE_PRESETS:
                raise ConfigError("unknown device preset %r" % (name,))
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if not self.total_time > 0.0:
            raise ConfigError("total_time must be positive")
        if self.shots < 1:
            raise ConfigError("shots must be >= 1")
        if self.sample_seeds < 1:
            raise ConfigError("sample_seeds must be >= 1")
        if not self.tau > 0.0 or any(not float(t) > 0.0 for t in self.taus):
            raise ConfigError("pulse durations must be positive")
        if self.source not in ("ideal", "device"):
            raise ConfigError("source must be 'ideal' or 'device'")
        for mode in self.modes:
            if mode not in ("120", "400", "tau_step"):
                raise ConfigError("unknown device-sim mode %r" % (mode,))


def preset_device(name: str, levels: int = 3, alpha: float = 200.0, g: float = 3.0) -> DeviceParams:
    """DeviceParams carrying a preset's T1/T2 values."""
    if name not in DEVICE_PRESETS:
        raise ConfigError("unknown device preset %r" % (name,))
    entry = DEVICE_PRESETS[name]
    return DeviceParams(
        alpha=alpha, g=g, levels_per_transmon=levels,
        t1=entry["t1"], t2=entry["t2"],
    )


def device_from_config(cfg: ExperimentConfig) -> DeviceParams:
    if cfg.preset is not None:
        return preset_device(cfg.preset, cfg.levels, cfg.alpha, cfg.g)
    return DeviceParams(
        alpha=cfg.alpha, g=cfg.g, levels_per_transmon=cfg.levels,
        t1=cfg.t1, t2=cfg.t2,
    )


_SECTION_KEYS = {
    "problem": {"total_time", "steps", "node_rule", "schedule_form"},
    "device": {"preset", "alpha", "g", "levels", "t1", "t2", "noise_enabled"},
    "grape": {
        "eps_cut", "chi", "penalty_exponent", "max_iterations",
        "target_infidelity", "init_amplitude", "seed", "tau",
    },
    "sampling": {"shots", "sample_seeds", "mitigation", "shot_grid"},
    "sweep": {"total_times", "step_counts", "taus", "presets", "modes", "source"},
}

_TUPLE_KEYS = {
    "t1", "t2", "total_times", "step_counts", "taus", "presets", "modes", "shot_grid",
}


def _coerce(key: str, value):
    if key in _TUPLE_KEYS:
        if not isinstance(value, (list, tuple)):
            raise ConfigError("%s must be a list" % key)
        return tuple(value)
    return value


def load_config(path: str | None) -> ExperimentConfig:
    """Parse a TOML run file; None means all defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("cannot read config file: %s" % exc) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config file is not valid TOML: %s" % exc) from exc

    fields: dict = {}
    for section, table in raw.items():
        allowed = _SECTION_KEYS.get(section)
        if allowed is None:
            raise ConfigError("unknown config section [%s]" % section)
        if not isinstance(table, dict):
            raise ConfigError("[%s] must be a table" % section)
        for key, value in table.items():
            if key not in allowed:
                raise ConfigError("unknown key %r in [%s]" % (key, section))
            fields[key] = _coerce(key, value)
    if "preset" in fields and fields["preset"] == "":
        fields["preset"] = None
    try:
        return ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
