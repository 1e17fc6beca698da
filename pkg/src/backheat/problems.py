"""Assembled problems, named example presets, and observation synthesis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ProblemConfig
from .errors import ConfigurationError
from .grids import (
    StateField,
    build_grid_1d,
    build_polar_grid,
    field_from_function,
)
from .operators import Generator, TimeStepper, assemble_1d, assemble_2d, solve_forward

__all__ = [
    "Problem",
    "EXACT_FIELDS",
    "PRESETS",
    "preset_config",
    "build_problem",
    "synthesize_observation",
]


def _example_1d_1(x):
    return (7.0 / 24.0) * (np.sin(np.pi * x) + 1.0 - x) * (np.sin(np.pi * x) + np.sqrt(x))


def _example_1d_2(x):
    return 6.0 * (1.0 - x) * np.log1p(x**2)


def _example_2d_1(r, theta):
    return np.sin(np.pi * r) * np.sin(theta / 2.0)


def _example_2d_2(r, theta):
    return (r * (1.0 - r)) ** 2 * np.cos(r * theta / 4.0)


#: Registered closed-form initial temperatures, sampled at grid nodes.
EXACT_FIELDS = {
    "1d-example1": _example_1d_1,
    "1d-example2": _example_1d_2,
    "2d-example1": _example_2d_1,
    "2d-example2": _example_2d_2,
}

#: Named experiment presets with their published parameter sets.
PRESETS = {
    "1d-example1": dict(
        geometry="interval", ell=1.0, nx=25, final_time=0.03, nt=100,
        eps=1e-8, stop_cost=1e-6, noise=0.01, exact="1d-example1",
    ),
    "1d-example2": dict(
        geometry="interval", ell=1.0, nx=25, final_time=0.03, nt=100,
        eps=1e-8, stop_cost=1e-6, noise=0.01, exact="1d-example2",
    ),
    "2d-example1": dict(
        geometry="disk", nr=25, ntheta=25, final_time=0.01, nt=100,
        eps=1e-8, stop_cost=5.82e-5, noise=0.01, exact="2d-example1",
    ),
    "2d-example2": dict(
        geometry="disk", nr=25, ntheta=25, final_time=0.01, nt=100,
        eps=1e-8, stop_cost=2.92e-7, noise=0.01, exact="2d-example2",
    ),
}


def preset_config(name: str, **overrides) -> ProblemConfig:
    """Configuration of a named preset, optionally with overrides applied."""
    try:
        base = PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}"
        ) from None
    return ProblemConfig(**{**base, **overrides})


@dataclass(eq=False)
class Problem:
    """A configuration realized on a grid: generator, stepper, exact field."""

    config: ProblemConfig
    grid: object
    generator: Generator
    stepper: TimeStepper
    exact: StateField | None

    @property
    def weights(self):
        return self.grid.weights


def _resolve_exact(grid, exact) -> StateField | None:
    if exact is None:
        return None
    if isinstance(exact, str):
        try:
            fn = EXACT_FIELDS[exact]
        except KeyError:
            raise ConfigurationError(
                f"unknown exact field {exact!r}; available: {sorted(EXACT_FIELDS)}"
            ) from None
        return field_from_function(grid, fn)
    values = np.asarray(exact, dtype=float)
    if values.shape != (grid.n_dofs,):
        raise ConfigurationError(
            f"exact field has {values.shape} values, grid has {grid.n_dofs} dofs"
        )
    return StateField(grid, values)


def build_problem(config: ProblemConfig) -> Problem:
    """Realize a configuration: build the grid, generator, and stepper."""
    if config.geometry == "interval":
        grid = build_grid_1d(config.ell, config.nx)
        gen = assemble_1d(grid, d=config.d, a=config.a, b=config.b)
    else:
        grid = build_polar_grid(config.nr, config.ntheta)
        gen = assemble_2d(grid, d=config.d, gamma=config.gamma, a=config.a, b=config.b)
    stepper = TimeStepper(T=config.final_time, nt=config.nt)
    exact = _resolve_exact(grid, config.exact)
    return Problem(config=config, grid=grid, generator=gen, stepper=stepper, exact=exact)


def synthesize_observation(problem: Problem, noise: float | None = None,
                           seed: int | None = None, draw: str | None = None):
    """Forward-solve the exact initial state and perturb the final state.

    Returns ``(y_clean, y_noisy)``.  Requires the problem to carry an exact
    initial temperature.
    """
    from .inversion import add_noise  # local import: inversion builds on problems

    if problem.exact is None:
        raise ConfigurationError("cannot synthesize an observation without an exact field")
    cfg = problem.config
    p = cfg.noise if noise is None else noise
    s = cfg.seed if seed is None else seed
    mode = cfg.noise_draw if draw is None else draw
    y_clean = solve_forward(problem.generator, problem.exact, problem.stepper)
    y_noisy = add_noise(y_clean, p, s, draw=mode)
    return y_clean, y_noisy
