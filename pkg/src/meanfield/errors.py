"""Exception types raised across the package."""


class MeanFieldError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(MeanFieldError, ValueError):
    pass


class GridMismatchError(MeanFieldError, ValueError):
    pass


class InvalidFieldError(MeanFieldError, ValueError):
    """A field contains NaN/Inf or has the wrong shape."""


class FieldFormatError(MeanFieldError, ValueError):
    """A field file could not be parsed."""


class ConvergenceError(MeanFieldError, RuntimeError):
    """An iteration ran out of budget.

    The last iterate is kept on ``last_iterate`` so callers can inspect it.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NoNegativeEndpointError(MeanFieldError, RuntimeError):
    """No field with negative energy was found within the scaling budget.

    This is the expected outcome when both interaction strengths lie in the
    coercive regime.
    """

    def __init__(self, message, best_energy=None):
        super().__init__(message)
        self.best_energy = best_energy
