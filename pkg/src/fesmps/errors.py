"""Exception types raised across the package."""


class FESError(Exception):
    """Base class for all package errors."""


class DegenerateDominantEigenvalue(FESError):
    pass


class EigensolverNoConvergence(FESError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class KTooLarge(FESError, ValueError):
    pass


class InitDimensionMismatch(FESError, ValueError):
    pass


class NonHermitianHamiltonian(FESError, ValueError):
    pass


class OverlapError(FESError, ValueError):
    pass


class NotNormalized(FESError, ValueError):
    pass


class UnsupportedLevel(FESError, ValueError):
    pass


class NonPositiveFixedPoint(FESError):
    pass


class BondDimensionTooLarge(FESError, ValueError):
    pass


class InsufficientPoints(FESError, ValueError):
    pass


class ScaleOutOfRange(FESError, ValueError):
    pass


class NoCoupling(FESError):
    pass


class InversionOutOfRange(FESError, ValueError):
    pass


class StateFileError(FESError):
    """A state file could not be read; ``path`` names the offending file."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
