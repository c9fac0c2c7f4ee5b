"""Exception types raised across the package."""


class InvalidConfigError(ValueError):
    """A model parameter is missing, non-finite or out of range."""


class IntegrationError(RuntimeError):
    """The adaptive integrator could not make progress."""

    def __init__(self, time, message=None):
        self.time = float(time)
        super().__init__(message or f"step size underflow at t={self.time:.6g}")


class NumericError(ArithmeticError):
    """A non-finite value or a failed decomposition."""


class StateSpaceError(ValueError):
    """The requested many-body simulation exceeds the supported size."""


class NormalizationError(ArithmeticError):
    """The homogeneous reference value is too small to normalize by."""
