"""Reconstruction of initial temperatures in heat equations with dynamic
boundary conditions from noisy final-time measurements.

The package assembles method-of-lines generators for the interval and the
polar unit disk, integrates the coupled bulk/boundary dynamics with
Crank-Nicolson, and inverts the severely ill-posed final-to-initial map by
an adjoint-based conjugate-gradient iteration with Tikhonov regularization.
A spectral suite (eigenbasis, singular values, Picard diagnostics, the
closed-form Tikhonov filter) quantifies the ill-posedness and provides an
independent oracle for the iterative route.
"""

from importlib.metadata import PackageNotFoundError, version

from .config import ProblemConfig
from .diagnostics import (
    IllPosednessReport,
    StabilityReport,
    ill_posedness_report,
    lipschitz_check,
    lipschitz_constant,
    log_convexity_check,
)
from .errors import ConfigurationError, NumericalError
from .estimators import (
    ConjugateGradientReconstructor,
    SpectralTikhonovReconstructor,
)
from .grids import (
    Grid1D,
    InnerProductWeights,
    PolarGrid,
    StateField,
    build_grid_1d,
    build_polar_grid,
    field_from_function,
    inner_product,
    norm,
)
from .inversion import (
    CGResult,
    IterationRecord,
    accuracy_error,
    add_noise,
    cg_reconstruct,
    convergence_error,
    cost,
    gradient,
    run_cg,
)
from .operators import (
    Generator,
    TimeStepper,
    Trajectory,
    assemble_1d,
    assemble_2d,
    apply_io,
    solve_adjoint,
    solve_forward,
    weighted_symmetry_defect,
)
from .problems import (
    EXACT_FIELDS,
    PRESETS,
    Problem,
    build_problem,
    preset_config,
    synthesize_observation,
)
from .spectral import (
    EigenSystem,
    PicardReport,
    eigensystem,
    picard_report,
    singular_value_report,
    spectral_tikhonov,
)

try:
    __version__ = version("backheat")
except PackageNotFoundError:  # pragma: no cover - not installed
    __version__ = "0.0.0"

__all__ = [
    "__version__",
    "ConfigurationError",
    "NumericalError",
    "Grid1D",
    "PolarGrid",
    "StateField",
    "InnerProductWeights",
    "build_grid_1d",
    "build_polar_grid",
    "field_from_function",
    "inner_product",
    "norm",
    "Generator",
    "TimeStepper",
    "Trajectory",
    "assemble_1d",
    "assemble_2d",
    "solve_forward",
    "solve_adjoint",
    "apply_io",
    "weighted_symmetry_defect",
    "EigenSystem",
    "PicardReport",
    "eigensystem",
    "picard_report",
    "singular_value_report",
    "spectral_tikhonov",
    "ProblemConfig",
    "IterationRecord",
    "CGResult",
    "add_noise",
    "cost",
    "gradient",
    "cg_reconstruct",
    "run_cg",
    "convergence_error",
    "accuracy_error",
    "StabilityReport",
    "IllPosednessReport",
    "log_convexity_check",
    "lipschitz_check",
    "lipschitz_constant",
    "ill_posedness_report",
    "Problem",
    "EXACT_FIELDS",
    "PRESETS",
    "preset_config",
    "build_problem",
    "synthesize_observation",
    "SpectralTikhonovReconstructor",
    "ConjugateGradientReconstructor",
]
