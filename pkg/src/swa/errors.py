"""Exception types shared across the package."""


class SwaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SwaError):
    """Malformed or inconsistent input data (CSV layout, shape mismatches, NaN cells)."""


class NumericalError(SwaError):
    """Numerically infeasible request (saturated model, invalid configuration)."""
