"""Exception hierarchy.

`ValidationError` subclasses map to CLI exit status 2, `NumericalError`
subclasses to exit status 3.
"""


class PlasmaPeaksError(Exception):
    """Base class for all package errors."""


class ValidationError(PlasmaPeaksError, ValueError):
    """Bad input: parameters, geometry or resolution."""


class DomainArgumentError(ValidationError):
    """Argument outside the supported range of a special function."""


class ParameterError(ValidationError):
    """Invalid cell or run parameters."""


class GeometryError(ValidationError):
    """A point, ball or stencil does not fit inside the domain."""


class ConfigurationError(ValidationError):
    """Peak configuration violates the separation constraints."""


class ResolutionError(ValidationError):
    """The grid does not resolve the requested structure."""


class EpsilonTooLargeError(ValidationError):
    """Amplitude system is singular or yields non-positive amplitudes."""


class DegenerateDomainError(ValidationError):
    """No admissible candidate point in the domain."""


class NumericalError(PlasmaPeaksError, RuntimeError):
    """Base class for numerical failures."""


class SingularityError(NumericalError):
    """Evaluation at a singular point."""


class SolverError(NumericalError):
    """Linear solve did not reach the requested residual."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NonconvergenceError(NumericalError):
    """Newton iteration failed; carries the last iterate."""

    def __init__(self, message, last_iterate=None, iterations=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


class CyclingError(NonconvergenceError):
    """Active set oscillates and the freeze safeguard did not break it."""
