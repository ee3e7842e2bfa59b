"""Exception types shared across the package."""


class FlrdtError(Exception):
    """Base class for all package errors."""


class ParamsError(FlrdtError, ValueError):
    """Invalid lifting parameters. ``index`` is the first offending position."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class MonotonicityViolation(ParamsError):
    pass


class BoundaryViolation(ParamsError):
    pass


class NonpositiveExponent(ParamsError):
    pass


class NegativeRadicand(ParamsError):
    pass


class UnsupportedFamily(FlrdtError, ValueError):
    pass


class DimensionMismatch(FlrdtError, ValueError):
    pass


class ExponentUnderflow(FlrdtError, ArithmeticError):
    pass


class QuadratureOrderTooLow(FlrdtError):
    pass


class NonpositiveAux(FlrdtError, ValueError):
    pass


class DomainError(FlrdtError, ValueError):
    """Evaluation point outside the region where the dual functional is finite."""


class OverflowGuard(FlrdtError, OverflowError):
    pass


class StepOutOfDomain(FlrdtError):
    pass


class BracketFailure(FlrdtError):
    pass


class BadBracket(FlrdtError, ValueError):
    pass


class NoisyBoundary(FlrdtError):
    pass


class SizeLimitExceeded(FlrdtError, ValueError):
    pass


class NoCrossing(FlrdtError):
    pass


class ConfigError(FlrdtError, ValueError):
    """Job configuration failed validation. ``path`` is a JSON pointer."""

    def __init__(self, message, path=""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path
