"""Experiment configuration: every scalar parameter of a reconstruction run."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigurationError

__all__ = ["ProblemConfig"]

_GEOMETRIES = ("interval", "disk")
_NOISE_DRAWS = ("shared", "per-dof")


@dataclass
class ProblemConfig:
    """All parameters of a synthetic reconstruction experiment.

    ``exact`` names a registered closed-form initial temperature (see
    ``backheat.problems.EXACT_FIELDS``) or supplies node values directly; it
    is used to synthesize the observation and to compute the accuracy error.
    ``noise_draw`` selects how the uniform noise enters the observation: one
    shared draw scaling the whole field ("shared", the default), or one
    independent draw per degree of freedom ("per-dof").
    """

    geometry: str = "interval"
    ell: float = 1.0
    nx: int = 25
    nr: int = 25
    ntheta: int = 25
    final_time: float = 0.03
    nt: int = 100
    d: float = 1.0
    gamma: float = 1.0
    a: float = 0.0
    b: float = 0.0
    eps: float = 1e-8
    stop_cost: float = 1e-6
    noise: float = 0.01
    noise_draw: str = "shared"
    seed: int = 20250809
    max_iter: int = 500
    exact: object = None

    def __post_init__(self):
        if self.geometry not in _GEOMETRIES:
            raise ConfigurationError(
                f"geometry must be one of {_GEOMETRIES}, got {self.geometry!r}"
            )
        if self.final_time <= 0.0:
            raise ConfigurationError(f"final_time must be positive, got {self.final_time}")
        if self.nt < 1:
            raise ConfigurationError(f"nt must be at least 1, got {self.nt}")
        if self.eps < 0.0:
            raise ConfigurationError(f"eps must be nonnegative, got {self.eps}")
        if self.stop_cost <= 0.0:
            raise ConfigurationError(f"stop_cost must be positive, got {self.stop_cost}")
        if not 0.0 <= self.noise < 1.0:
            raise ConfigurationError(f"noise must lie in [0, 1), got {self.noise}")
        if self.noise_draw not in _NOISE_DRAWS:
            raise ConfigurationError(
                f"noise_draw must be one of {_NOISE_DRAWS}, got {self.noise_draw!r}"
            )
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be at least 1, got {self.max_iter}")

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemConfig":
        """Build from a plain mapping, rejecting unknown keys fail-fast."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json_file(cls, path) -> "ProblemConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError as exc:
            raise ConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"config file {path} must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        """Plain JSON-serializable mapping (array-valued ``exact`` becomes a list)."""
        out = dataclasses.asdict(self)
        exact = out["exact"]
        if exact is not None and not isinstance(exact, str):
            out["exact"] = [float(v) for v in exact]
        return out

    def replace(self, **changes) -> "ProblemConfig":
        return dataclasses.replace(self, **changes)
