"""Exception types shared across the package."""


class EarfaError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(EarfaError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class ConfigError(EarfaError, ValueError):
    """A configuration value or combination of values is invalid."""


class ValidationError(EarfaError, ValueError):
    """An input value violates a documented precondition."""


class UsageError(EarfaError, RuntimeError):
    """An API was called in a state where the call is meaningless."""


class WeightLoadError(EarfaError, IOError):
    """A weight file is missing, truncated, or not in the expected format."""


class NumericError(EarfaError, ArithmeticError):
    """Non-finite values appeared where finite values are required."""
