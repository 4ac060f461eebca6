"""Exception types raised across the package."""


class TrackingError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(TrackingError):
    """Geometry has no solution (zero range, missing specular point, ...)."""


class NumericalFailure(TrackingError):
    """A covariance or innovation matrix could not be factorized."""


class InvalidState(TrackingError):
    """A density is outside the domain of the requested operation."""


class AllWeightsZero(TrackingError):
    """Every particle received zero likelihood for some measurement."""


class InvalidInit(TrackingError):
    """Initial association matrix violates the one-to-one constraint."""


class EmptyPosterior(TrackingError):
    """All child hypotheses of a recursion step carry zero weight."""


class ConfigError(TrackingError):
    """Scenario or manifest file is malformed."""


class ParseError(TrackingError):
    """Measurement file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RuntimeFailure(TrackingError):
    """A Monte Carlo run aborted; carries the run index."""

    def __init__(self, message, run=None):
        self.run = run
        if run is not None:
            message = f"run {run}: {message}"
        super().__init__(message)
