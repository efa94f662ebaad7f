"""Exception types raised by the numerical core."""


class EdgeGasError(Exception):
    """Base class for all package errors."""


class ValidationError(EdgeGasError, ValueError):
    """Malformed input (configuration, field specification)."""


class NonConvex(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class DefinitenessViolation(ValidationError):
    pass


class NumericalError(EdgeGasError, ArithmeticError):
    """A numerical procedure failed to meet its own accuracy contract."""


class NoConvergence(NumericalError):
    pass


class EndpointsOutsideDomain(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class QuadratureUnstable(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class Underflow(NumericalError):
    pass


class SeriesInstability(NumericalError):
    pass


class ToleranceExceeded(NumericalError):
    pass


class EffectiveSampleSizeTooSmall(NumericalError):
    pass


class InsufficientTailSamples(NumericalError):
    pass


class MixingWarning(UserWarning):
    """Integrated autocorrelation time too long for the chosen thinning."""
