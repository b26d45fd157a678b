"""Exception types shared across the package."""


class FsiError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(FsiError, ValueError):
    """An argument violates a documented precondition."""


class MeshMismatchError(FsiError):
    """Fluid and solid meshes (or a multiplier grid) do not match on the
    interface."""


class SingularMapError(FsiError):
    """Reference-to-physical map of a degenerate (zero-area) triangle."""


class SingularMatrixError(FsiError):
    """A factorization hit a numerically singular pivot."""


class OperatorSizeError(FsiError):
    """Operator dimension exceeds the configured densification cap."""


class ConfigError(FsiError):
    """Configuration text could not be parsed or validated.

    Carries the offending key so callers can report the exact path.
    """

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class NoConvergenceError(FsiError):
    """An iterative solve exhausted its iteration budget.

    Attributes
    ----------
    best : ndarray
        Iterate with the smallest residual seen so far.
    iterations : int
        Number of iterations performed.
    residual_norms : list of float
        Residual 2-norm history, starting at iteration 0.
    """

    def __init__(self, message, best, iterations, residual_norms):
        super().__init__(message)
        self.best = best
        self.iterations = iterations
        self.residual_norms = residual_norms
