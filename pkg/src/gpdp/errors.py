"""Exception types raised across the package."""


class GpdpError(Exception):
    """Base class for all package errors."""


class ParameterError(GpdpError, ValueError):
    """An argument is outside its admissible range or has the wrong shape."""


class NumericError(GpdpError, ArithmeticError):
    """A linear-algebra step failed (non-PD matrix, negative variance, ...)."""


class ConvergenceError(GpdpError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The final duality gap is kept in ``gap``.
    """

    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class DegenerateDataError(GpdpError, ValueError):
    """The data cannot support the requested statistic (e.g. zero IQR)."""


class LicenseError(GpdpError, ValueError):
    """A sensitivity bound does not license the requested noise kernel."""


class StateFileError(GpdpError, OSError):
    """A persisted query-state file is malformed."""
