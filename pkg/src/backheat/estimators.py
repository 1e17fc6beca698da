"""Scikit-learn style estimators wrapping the two reconstruction routes.

Both estimators are parameterized by a built ``Problem`` (geometry, operator,
stepper) plus the regularization knobs, follow the fit/transform protocol,
and expose ``get_params``/``set_params`` through ``BaseEstimator`` so they
compose with model-selection tooling.  ``X`` rows are final-time
measurements laid out as flat vectors of node values; ``transform`` maps
each row to the reconstructed initial state.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import ConfigurationError
from .grids import StateField
from .inversion import run_cg
from .problems import Problem
from .spectral import eigensystem, singular_value_report

__all__ = [
    "SpectralTikhonovReconstructor",
    "ConjugateGradientReconstructor",
    "validate_observations",
]


def validate_observations(X, n_dofs: int) -> np.ndarray:
    """Coerce input to a finite (n_samples, n_dofs) float array.

    Accepts a single flat measurement, a stack of measurements, or a
    ``StateField``.
    """
    if isinstance(X, StateField):
        X = X.values
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_dofs:
        raise ConfigurationError(
            f"expected observations with {n_dofs} values per row, got shape {X.shape}"
        )
    if not np.all(np.isfinite(X)):
        raise ConfigurationError("observations contain non-finite values")
    return X


class SpectralTikhonovReconstructor(BaseEstimator):
    """Reconstruct initial states by the spectral Tikhonov filter.

    ``fit`` performs the eigendecomposition of the problem's generator;
    ``transform`` applies the filter sigma/(sigma^2 + eps) to each row's
    expansion coefficients.  Cheap to apply to many measurements once
    fitted.
    """

    def __init__(self, problem: Problem, eps: float = 1e-8):
        self.problem = problem
        self.eps = eps

    def fit(self, X=None, y=None):
        if self.eps < 0.0:
            raise ConfigurationError(f"eps must be nonnegative, got {self.eps}")
        self.eigensystem_ = eigensystem(self.problem.generator)
        sigma = singular_value_report(self.eigensystem_, self.problem.stepper.T)
        self.sigma_ = sigma
        self.filter_ = sigma / (sigma**2 + self.eps)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "filter_"):
            raise NotFittedError("call fit before transform")
        X = validate_observations(X, self.problem.grid.n_dofs)
        w = self.problem.grid.weights.total
        coeffs = (X * w[None, :]) @ self.eigensystem_.modes
        return (coeffs * self.filter_[None, :]) @ self.eigensystem_.modes.T

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit().transform(X)

    def reconstruct(self, y_delta: StateField) -> StateField:
        """Single-field convenience wrapper around ``transform``."""
        values = self.transform(y_delta)[0]
        return StateField(self.problem.grid, values)


class ConjugateGradientReconstructor(BaseEstimator):
    """Reconstruct initial states by the adjoint-based CG iteration.

    ``fit(y)`` runs the iteration on one measurement and exposes the result
    as fitted attributes (``initial_state_``, ``history_``, ``stop_reason_``,
    ``n_iter_``, ``final_cost_``); ``transform`` reconstructs each row of a
    measurement stack independently.
    """

    def __init__(self, problem: Problem, eps: float = 1e-8,
                 stop_cost: float = 1e-6, max_iter: int = 500):
        self.problem = problem
        self.eps = eps
        self.stop_cost = stop_cost
        self.max_iter = max_iter

    def _run(self, values: np.ndarray):
        y = StateField(self.problem.grid, values.copy())
        return run_cg(
            self.problem.generator, self.problem.stepper, y,
            eps=self.eps, stop_cost=self.stop_cost, max_iter=self.max_iter,
            y_clean=None, g_exact=self.problem.exact,
        )

    def fit(self, X, y=None):
        X = validate_observations(X, self.problem.grid.n_dofs)
        if X.shape[0] != 1:
            raise ConfigurationError("fit expects a single measurement; use transform for stacks")
        field, history, reason = self._run(X[0])
        self.initial_state_ = field
        self.history_ = history
        self.stop_reason_ = reason
        self.n_iter_ = history[-1].n
        self.final_cost_ = history[-1].cost
        return self

    def transform(self, X) -> np.ndarray:
        X = validate_observations(X, self.problem.grid.n_dofs)
        out = np.empty_like(X)
        for i in range(X.shape[0]):
            field, _, _ = self._run(X[i])
            out[i] = field.values
        return out

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.transform(X)
