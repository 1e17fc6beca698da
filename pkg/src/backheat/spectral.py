"""Eigenanalysis of the generator and spectral solvers for the inverse problem.

The backward problem is diagonal in the eigenbasis of -A: a mode with
eigenvalue lam is damped by the factor sigma = exp(-lam*T) over the
observation window, so recovering it from final-time data amplifies noise by
exp(lam*T).  This module computes the discrete eigenbasis (orthonormal in
the weighted inner product), the singular values of the input-output map,
the Picard solvability diagnostics, and the closed-form Tikhonov minimizer
in spectral coordinates.  The last serves as an independent oracle for the
iterative reconstruction: both minimize the same quadratic, by entirely
different routes.

Eigenpairs are obtained from the similarity transform B = W^1/2 (-A) W^-1/2,
symmetrized as (B + B^T)/2.  On the interval the transform is symmetric to
rounding; on the disk it carries the assembly's known asymmetry defect,
which is stored on the result rather than hidden (tight spectral identities
are therefore only asserted in 1-D).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .grids import StateField
from .operators import Generator, TimeStepper, solve_forward

__all__ = [
    "EigenSystem",
    "PicardReport",
    "eigensystem",
    "apply_io",
    "singular_value_report",
    "picard_report",
    "spectral_tikhonov",
]


@dataclass(eq=False)
class EigenSystem:
    """Full spectrum of -A, ascending, with weighted-orthonormal modes.

    ``modes[:, k]`` holds the k-th eigenvector's node values;
    ``symmetry_defect`` is the largest antisymmetric entry of the scaled
    operator before symmetrization.
    """

    grid: object
    eigenvalues: np.ndarray
    modes: np.ndarray
    symmetry_defect: float

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    def mode(self, k: int) -> StateField:
        return StateField(self.grid, self.modes[:, k].copy())

    def coefficients(self, f: StateField) -> np.ndarray:
        """Expansion coefficients <f, phi_k> in the weighted inner product."""
        w = self.grid.weights.total
        return self.modes.T @ (w * f.values)

    def synthesize(self, coeffs: np.ndarray) -> StateField:
        """Field with the given expansion coefficients."""
        return StateField(self.grid, self.modes @ np.asarray(coeffs, dtype=float))


def eigensystem(gen: Generator) -> EigenSystem:
    """Eigen-decomposition of -A as a weighted symmetric problem."""
    w = gen.weights
    sw = np.sqrt(w)
    B = (sw[:, None] * (-gen.matrix)) / sw[None, :]
    defect = float(np.abs(B - B.T).max())
    sym = 0.5 * (B + B.T)
    try:
        lam, V = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed on a {sym.shape[0]}-dof generator: {exc}") from exc
    modes = V / sw[:, None]
    return EigenSystem(grid=gen.grid, eigenvalues=lam, modes=modes, symmetry_defect=defect)


def apply_io(gen: Generator, stepper: TimeStepper, g: StateField) -> StateField:
    """Input-output map (initial state to Y(T)); alias of the forward solve."""
    return solve_forward(gen, g, stepper)


def singular_value_report(eig: EigenSystem, T: float) -> np.ndarray:
    """Singular values sigma_k = exp(-lam_k*T), aligned with the eigenvalues.

    Uses the exact exponential of the continuous-time flow; comparisons with
    the time-stepped map carry its O(dt^2) error separately.
    """
    if T <= 0.0:
        raise ConfigurationError(f"final time must be positive, got {T}")
    return np.exp(-eig.eigenvalues * T)


@dataclass(eq=False)
class PicardReport:
    """Mode-by-mode solvability diagnostics for final-time data.

    ``amplified[k] = exp(lam_k*T) * coefficients[k]**2`` are the terms of the
    solvability series; the data admits a (discrete) exact reconstruction
    only while their partial sums stay small.  ``overflow_index`` is the
    first k whose amplified term exceeds the threshold (None if none does),
    and ``reconstruction`` is the raw amplified series evaluated anyway:
    overflowing entries propagate as inf rather than being clamped.
    """

    coefficients: np.ndarray
    amplified: np.ndarray
    partial_sums: np.ndarray
    overflow_index: int | None
    threshold: float
    reconstruction: StateField

    @property
    def representable(self) -> bool:
        return self.overflow_index is None


def picard_report(y_T: StateField, eig: EigenSystem, T: float,
                  threshold: float = 1e12) -> PicardReport:
    """Evaluate the solvability series of the backward problem on given data."""
    if threshold <= 0.0:
        raise ConfigurationError(f"threshold must be positive, got {threshold}")
    coeffs = eig.coefficients(y_T)
    with np.errstate(over="ignore", invalid="ignore"):
        growth = np.exp(eig.eigenvalues * T)
        amplified = growth * coeffs**2
        partial = np.cumsum(amplified)
        series = eig.synthesize(growth * coeffs)
    above = np.nonzero(~(amplified <= threshold))[0]  # catches inf and nan too
    overflow = int(above[0]) if above.size else None
    return PicardReport(
        coefficients=coeffs,
        amplified=amplified,
        partial_sums=partial,
        overflow_index=overflow,
        threshold=float(threshold),
        reconstruction=series,
    )


def spectral_tikhonov(y_T: StateField, eig: EigenSystem, T: float, eps: float) -> StateField:
    """Closed-form minimizer of the regularized data-misfit quadratic.

    Applies the filter sigma/(sigma^2 + eps) with sigma_k = exp(-lam_k*T) to
    the data coefficients.  For eps = 0 the filter degenerates to the exact
    series 1/sigma, which may overflow on severely damped modes; such
    entries are left as computed so the instability is visible (use
    ``picard_report`` to locate them).
    """
    if eps < 0.0:
        raise ConfigurationError(f"regularization weight must be nonnegative, got {eps}")
    sigma = singular_value_report(eig, T)
    coeffs = eig.coefficients(y_T)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        filtered = (sigma / (sigma**2 + eps)) * coeffs
    return eig.synthesize(filtered)
