"""Experiment configuration: presets, key=value files, controller specs."""

import os
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from qfc.controllers import ControlPolicy
from qfc.oscillator import QuadraticParams, cooling_params, inverted_params
from qfc.quartic import QuarticParams, quartic_params


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit status 2."""


PRESETS = ("cooling-paper", "inverted-paper", "quartic-paper")

QUADRATIC_CONTROLLERS = ("optimal_trajectory", "discretized_optimal", "bang_bang")
QUARTIC_CONTROLLERS = ("damping", "quadratic", "gaussian_approx")
ALL_CONTROLLERS = QUADRATIC_CONTROLLERS + QUARTIC_CONTROLLERS + ("dqn", "zero")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "cooling"
    controller: str = "optimal_trajectory"
    episodes: int = 100
    seed: Optional[int] = None  # resolve_seed applies the QCTRL_SEED fallback
    out: Optional[str] = None
    workers: int = 0  # 0 = auto
    checkpoint: Optional[str] = None
    zeta: float = 0.5
    k_quadratic: Optional[float] = None
    # physical overrides, None = preset value
    gamma: Optional[float] = None
    dt: Optional[float] = None
    t_max: Optional[float] = None
    x_min: Optional[float] = None
    x_max: Optional[float] = None
    controls_per_unit_time: Optional[int] = None

    def sim_params(self):
        overrides = {}
        for key in ("gamma", "dt", "t_max", "controls_per_unit_time"):
            value = getattr(self, key)
            if value is not None:
                overrides[key] = value
        if self.problem == "cooling":
            return cooling_params(**overrides)
        if self.problem == "inverted":
            return inverted_params(**overrides)
        if self.problem == "quartic":
            for key in ("x_min", "x_max"):
                value = getattr(self, key)
                if value is not None:
                    overrides[key] = value
            return quartic_params(**overrides)
        raise ConfigError(f"unknown problem {self.problem!r}")

    def policy(self) -> ControlPolicy:
        if self.controller not in ALL_CONTROLLERS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        return ControlPolicy(
            kind=self.controller, zeta=self.zeta, k_quadratic=self.k_quadratic
        )


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}
_INT_KEYS = {"episodes", "seed", "workers", "controls_per_unit_time"}
_FLOAT_KEYS = {"zeta", "k_quadratic", "gamma", "dt", "t_max", "x_min", "x_max"}
_STR_KEYS = {"problem", "controller", "out", "checkpoint"}


def parse_config_text(text: str) -> dict:
    """Parse flat key=value lines; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from exc
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be a number") from exc
        elif key in _STR_KEYS:
            values[key] = value
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return values


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def apply_preset(name: str) -> dict:
    if name == "cooling-paper":
        return {"problem": "cooling"}
    if name == "inverted-paper":
        return {"problem": "inverted"}
    if name == "quartic-paper":
        return {"problem": "quartic"}
    raise ConfigError(f"unknown preset {name!r}; choose from {PRESETS}")


def resolve_seed(explicit: Optional[int]) -> int:
    """--seed flag, else the QCTRL_SEED environment variable, else 0."""
    if explicit is not None:
        return explicit
    env = os.environ.get("QCTRL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"QCTRL_SEED={env!r} is not an integer") from exc
    return 0


def build_config(
    preset: Optional[str] = None,
    config_path: Optional[str] = None,
    cli_values: Optional[dict] = None,
) -> ExperimentConfig:
    """Merge preset, config file and CLI values (CLI wins)."""
    values = {}
    if preset is not None:
        values.update(apply_preset(preset))
    if config_path is not None:
        values.update(load_config(config_path))
    for key, value in (cli_values or {}).items():
        if value is not None:
            values[key] = value
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
