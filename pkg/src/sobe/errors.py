"""Exception hierarchy shared by all modules."""


class SobeError(Exception):
    """Base class for every error raised by the package."""


class InvalidSymbolError(SobeError, ValueError):
    pass


class DegenerateRootsError(SobeError):
    """Two roots of the cubic in gamma**2 coincide (Vandermonde determinant ~ 0)."""


class AmbiguousSignError(SobeError):
    pass


class TrackingFailure(SobeError):
    """Nearest-neighbour root matching could not decide a unique pairing."""


class NonconvergentQuadrature(SobeError):
    pass


class TailTooFat(SobeError):
    pass


class RepresentationMismatch(SobeError, ValueError):
    pass


class ResampleOutOfWindow(SobeError):
    pass


class InvalidExponent(SobeError, ValueError):
    pass


class NoContraction(SobeError):
    pass


class MaxIterExceeded(SobeError):
    pass


class LambdaExhausted(SobeError):
    pass


class ConfigError(SobeError, ValueError):
    pass


class AliasingWarning(UserWarning):
    pass
