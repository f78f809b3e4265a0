"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration and dependency problems
exit with 2, numeric failures and power-flow divergence with 3.
"""


class InputShapeError(ValueError):
    """An array argument has the wrong length or shape."""


class ConfigError(ValueError):
    """A configuration value, file, or precondition is invalid."""


class DependencyError(ConfigError):
    """A required upstream artifact (model, dataset) is missing."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class DivergenceError(NumericError):
    """An iterative solver failed to converge."""


class InternalError(RuntimeError):
    """An internal consistency check failed (e.g. a frozen model drifted)."""
