"""Exception hierarchy shared by every module of the package."""


class KanovaError(Exception):
    """Base class for all errors raised by :mod:`kanova`."""


class InvalidArgumentError(KanovaError, ValueError):
    """An argument is outside the accepted domain."""


class ResourceLimitError(KanovaError):
    """A computation would exceed a configured size budget."""


class PreconditionError(KanovaError):
    """A mathematical hypothesis of the requested operation does not hold."""


class NotPositiveDefiniteError(KanovaError):
    """A covariance matrix could not be factorized, even with jitter.

    Attributes
    ----------
    min_eigenvalue : float
        Smallest eigenvalue of the input matrix (diagnostic).
    """

    def __init__(self, message, min_eigenvalue=float("nan")):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class EvaluationError(KanovaError):
    """A kernel or function produced non-finite values."""


class DegenerateError(KanovaError, ValueError):
    """A quantity is undefined because a normalizing term vanishes."""


class NumericalConsistencyWarning(UserWarning):
    """Raised (as a warning) when a clamped quantity was noticeably negative."""
