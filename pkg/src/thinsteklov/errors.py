"""Exception hierarchy shared by all modules."""


class ThinSteklovError(Exception):
    """Base class for every error raised by this package."""


class SigmaOutOfRange(ThinSteklovError, ValueError):
    pass


class NonPositive(ThinSteklovError, ValueError):
    pass


class BadDimension(ThinSteklovError, ValueError):
    pass


class BadCount(ThinSteklovError, ValueError):
    pass


class OutOfDomain(ThinSteklovError, ValueError):
    pass


class NonPositiveProfile(ThinSteklovError, ValueError):
    pass


class NotPositiveDefinite(ThinSteklovError, ArithmeticError):
    """Cholesky factorization hit a non-positive pivot.

    ``pivot`` is the zero-based index of the failing pivot.
    """

    def __init__(self, pivot, message=None):
        self.pivot = int(pivot)
        super().__init__(message or f"matrix is not positive definite (pivot {self.pivot})")


class SingularSystem(ThinSteklovError, ArithmeticError):
    pass


class TooFewFinite(ThinSteklovError, ValueError):
    pass


class ZeroTrace(ThinSteklovError, ValueError):
    pass


class DegenerateFit(ThinSteklovError, ValueError):
    pass


class NonPositiveDeviation(ThinSteklovError, ValueError):
    pass


class ConfigError(ThinSteklovError, ValueError):
    pass


class ReportIOError(ThinSteklovError, OSError):
    pass


class StudyError(ThinSteklovError, RuntimeError):
    """A solver failed inside a study; carries the offending (epsilon, k)."""

    def __init__(self, epsilon, k, cause):
        self.epsilon = epsilon
        self.k = k
        self.cause = cause
        super().__init__(f"study failed at epsilon={epsilon!r}, k={k!r}: {cause}")
