"""Exception hierarchy shared across the package."""


class HDTDError(Exception):
    """Base class for every error raised by hdtd."""


class InvalidSample(HDTDError, ValueError):
    """Sample shape or contents violate the matrix-stack contract."""


class SampleTooSmall(HDTDError, ValueError):
    pass


class DegenerateSample(HDTDError, ArithmeticError):
    """A trace estimate needed by a test statistic is nonpositive or zero.

    ``estimator`` names the offending quantity (``t1``, ``t2`` or ``t2_star``).
    """

    def __init__(self, message: str, estimator: str = "") -> None:
        super().__init__(message)
        self.estimator = estimator


class NotPositiveSemiDefinite(HDTDError, ValueError):
    pass


class SingularMatrix(HDTDError, ValueError):
    pass


class NonpositiveScale(HDTDError, ArithmeticError):
    pass


class NullAlternative(HDTDError, ValueError):
    """The requested power bound is undefined because the alternative is the null."""


class InvalidConfig(HDTDError, ValueError):
    pass


class MalformedFile(HDTDError, ValueError):
    """A data file does not parse as a matrix stack or long-form CSV."""


class DimensionMismatch(HDTDError, ValueError):
    """Declared and actual dimensions of a data file disagree."""
