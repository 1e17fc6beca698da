"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration, preset, or mismatched field/grid shapes."""


class NumericalError(RuntimeError):
    """A linear solve failed or a computation produced non-finite values."""
