"""Exception types shared across the package.

NumericError subclasses mark failures of the mathematics (blow-up, failed
bracket, resonance, ...) as opposed to bad configuration; the CLI maps the
two groups to distinct exit codes.
"""


class GkensoError(Exception):
    """Base class for all package errors."""


class ConfigError(GkensoError):
    """Invalid user-supplied configuration (bad key, malformed range, ...)."""


class NumericError(GkensoError):
    """A numerical procedure failed in a detectable way."""


class BlowupError(NumericError):
    """Trajectory left the admissible region (NaN or overflow).

    Carries the approximate blow-up time in ``time``.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class BracketError(NumericError):
    """A bisection bracket does not straddle the sought transition."""


class ResonanceError(NumericError):
    """A near-resonant eigenvalue combination blocks manifold construction."""


class ConditioningError(NumericError):
    """Eigenvector matrix too ill-conditioned to trust the decomposition."""


class NoOrbitError(NumericError):
    """No periodic orbit of the requested kind exists at this parameter."""


class NoPeriodicityError(NumericError):
    """A time series shows no detectable periodicity."""
