"""Exception hierarchy shared by the library and the command line."""


class GPError(Exception):
    """Base class for all errors raised by gphlr."""


class DataError(GPError, ValueError):
    """Malformed, inconsistent or out-of-range input data."""


class NumericError(GPError, ArithmeticError):
    """A numerical routine failed (non-PD matrix, non-convergence, ...)."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class DefinitenessError(NumericError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing leading minor.
    """

    def __init__(self, message, pivot=None, step=None):
        super().__init__(message, step=step)
        self.pivot = pivot
