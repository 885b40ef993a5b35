"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A scalar parameter lies outside its admissible range."""


class RejectedInputError(ValueError):
    """Sampled input data violates a precondition (non-finite values, barrier)."""


class StructuralError(ValueError):
    """Objects that must share a grid (or shape) do not."""


class NumericalError(ArithmeticError):
    """A numerical routine failed, e.g. a covariance matrix is not positive definite."""


class DegenerateEstimateError(ArithmeticError):
    """The observed information is zero, so the drift estimate is undefined."""
