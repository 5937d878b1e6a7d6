"""Scenario configuration: flat key=value text with line-precise diagnostics.

One key per line, ``#`` starts a comment, unknown keys are rejected.  Every
scenario kind carries its own defaults; ``scenario=slab1d`` alone reproduces
the reference 1D experiment (kappa = sigma = 1.5, 1000 cells, cfl 0.8,
snapshots at 0.1 .. 0.4), and ``scenario=lattice2d`` the desk-scale lattice
run (100 x 100 cells, dt = 1e-3, final time 2).
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dataclass_fields
from typing import Optional, Tuple

__all__ = ["ConfigError", "ScenarioConfig", "parse_config", "serialize_config",
           "load_config"]

SCENARIOS = ("slab1d", "lattice2d", "model", "verify")

CLOSURES_1D = ("pn", "diffusion", "diffusion_correction", "crescendo",
               "crescendo_correction", "trapezoidal", "general_linear")
CLOSURES_2D = ("diffusion", "crescendo", "both")


class ConfigError(ValueError):
    """Configuration problem, with the offending line number when known."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of one run."""

    scenario: str
    closure: str = "pn"
    N: int = 1
    kappa: float = 1.5
    sigma: float = 1.5
    qhat: float = 0.0
    domain: Tuple[float, float] = (0.0, 1.0)
    n_cells: int = 1000
    nx: int = 100
    ny: int = 100
    cfl: float = 0.8
    dt: float = 1e-3
    t_final: float = 0.4
    snapshot_times: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)
    x0: Optional[float] = None
    output_dir: str = "output"
    reference_N: int = 51
    boundary: str = "dirichlet"
    beta: float = 0.5
    tau: float = 1.0
    geometry: Optional[str] = None
    measure_file: Optional[str] = None
    figures: bool = True
    moments_L: Optional[int] = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; "
                              f"choose one of {SCENARIOS}")
        if self.scenario == "slab1d" and self.closure not in CLOSURES_1D:
            raise ConfigError(f"closure {self.closure!r} is not a 1D closure "
                              f"(choose one of {CLOSURES_1D})")
        if self.scenario == "lattice2d" and self.closure not in CLOSURES_2D:
            raise ConfigError(f"closure {self.closure!r} is not a 2D closure "
                              f"(choose one of {CLOSURES_2D})")
        if self.scenario == "slab1d" and self.n_cells < 8:
            raise ConfigError("n_cells must be at least 8")
        if self.scenario == "lattice2d" and (self.nx < 8 or self.ny < 8):
            raise ConfigError("nx and ny must be at least 8")
        if self.t_final < 0:
            raise ConfigError("t_final must be nonnegative")
        times = self.snapshot_times
        if list(times) != sorted(times):
            raise ConfigError("snapshot_times must be sorted")
        if times and (times[0] < 0 or times[-1] > self.t_final + 1e-12):
            raise ConfigError("snapshot_times must lie within [0, t_final]")
        if self.domain[1] <= self.domain[0]:
            raise ConfigError("domain must satisfy a < b")
        if not (0 < self.cfl <= 1.0):
            raise ConfigError("cfl must lie in (0, 1]")
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.closure == "general_linear" and self.scenario == "slab1d" \
                and self.measure_file is None:
            raise ConfigError("general_linear closure requires measure_file=")


_DEFAULTS = {
    "slab1d": dict(closure="pn", N=1, t_final=0.4,
                   snapshot_times=(0.1, 0.2, 0.3, 0.4), domain=(0.0, 1.0)),
    "lattice2d": dict(closure="both", t_final=2.0, snapshot_times=(2.0,)),
    "model": dict(t_final=3.0, snapshot_times=(0.1, 1.0, 2.0, 3.0),
                  domain=(-8.0, 8.0), n_cells=2048),
    "verify": dict(t_final=0.4, snapshot_times=()),
}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_times(text: str) -> Tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(p) for p in text.split(","))


def _parse_domain(text: str) -> Tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValueError("domain needs two comma-separated numbers")
    return (float(parts[0]), float(parts[1]))


_PARSERS = {
    "scenario": str, "closure": str, "output_dir": str, "boundary": str,
    "geometry": str, "measure_file": str,
    "N": int, "n_cells": int, "nx": int, "ny": int, "reference_N": int,
    "moments_L": int,
    "kappa": float, "sigma": float, "qhat": float, "cfl": float, "dt": float,
    "t_final": float, "x0": float, "beta": float, "tau": float,
    "snapshot_times": _parse_times, "domain": _parse_domain,
    "figures": _parse_bool,
}


def parse_config(text: str) -> ScenarioConfig:
    """Parse key=value text into a validated ScenarioConfig."""
    raw = {}
    lines = {}
    for lineno, orig in enumerate(text.splitlines(), start=1):
        line = orig.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {orig.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            raw[key] = _PARSERS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}")
        lines[key] = lineno

    if "scenario" not in raw or not raw["scenario"]:
        raise ConfigError("missing required key 'scenario'")
    scenario = raw["scenario"]
    if scenario not in SCENARIOS:
        raise ConfigError(f"line {lines['scenario']}: unknown scenario "
                          f"{scenario!r}; choose one of {SCENARIOS}")
    kwargs = dict(_DEFAULTS[scenario])
    kwargs.update(raw)
    try:
        return ScenarioConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(str(exc))


def serialize_config(config: ScenarioConfig) -> str:
    """Canonical text form; parse(serialize(c)) == c."""
    lines = []
    for f in dataclass_fields(config):
        value = getattr(config, f.name)
        if value is None:
            continue
        if f.name == "snapshot_times":
            text = ",".join(f"{v:.17g}" for v in value)
        elif f.name == "domain":
            text = f"{value[0]:.17g},{value[1]:.17g}"
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = f"{value:.17g}"
        else:
            text = str(value)
        lines.append(f"{f.name}={text}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())
