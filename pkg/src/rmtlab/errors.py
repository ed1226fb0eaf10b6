"""Exception types raised across rmtlab."""


class RmtLabError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(RmtLabError, ValueError):
    pass


class InvalidDegree(RmtLabError, ValueError):
    pass


class InvalidBandwidth(RmtLabError, ValueError):
    pass


class GenerationFailure(RmtLabError, RuntimeError):
    pass


class InvalidProfile(RmtLabError, ValueError):
    pass


class OrderTooLarge(RmtLabError, ValueError):
    pass


class OddOrder(RmtLabError, ValueError):
    pass


class NoValidRho(RmtLabError, RuntimeError):
    pass


class NoConvergence(RmtLabError, RuntimeError):
    pass


class BudgetExceeded(RmtLabError, RuntimeError):
    pass


class LengthOdd(RmtLabError, ValueError):
    pass


class BoundViolated(RmtLabError, AssertionError):
    """A proven inequality failed numerically, which points to a bug."""
