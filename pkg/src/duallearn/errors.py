"""Exception hierarchy shared by all duallearn modules."""


class DualLearnError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DualLearnError, ValueError):
    """Malformed runtime input: dimension mismatch, empty dataset, bad domain."""


class ConfigurationError(DualLearnError, ValueError):
    """Invalid static configuration: unknown loss kind, bad solver setup."""


class SurrogateRequiredError(ConfigurationError):
    """A gradient was requested for a loss that is not differentiable."""


class NumericError(DualLearnError, ArithmeticError):
    """Non-finite values encountered where finite arithmetic is required."""
