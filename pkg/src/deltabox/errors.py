"""Exception hierarchy shared by every module of the package."""


class DeltaBoxError(Exception):
    """Base class for all errors raised by deltabox."""


class DomainError(DeltaBoxError, ValueError):
    """An argument lies outside the box or outside a valid index range."""


class DivergenceError(DeltaBoxError):
    """A protocol was evaluated at or beyond the point where it diverges."""


class InstabilityError(DeltaBoxError):
    """A time stepper produced amplitudes beyond its stability bound."""


class ConfigurationError(DeltaBoxError, ValueError):
    """Inconsistent or unsupported run configuration."""


class ResolutionError(DeltaBoxError):
    """A spatial grid is too coarse for the requested modes."""


class InterpolationError(DeltaBoxError):
    """A time was requested that is not on the completed time grid."""


class SingularityError(DeltaBoxError):
    """A formula was evaluated where it divides by a (near) zero amplitude."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class NumericalError(DeltaBoxError):
    """An iterative numerical method failed to converge."""
