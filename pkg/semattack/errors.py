"""Exception hierarchy for semattack."""


class SemattackError(Exception):
    """Base class for every error raised by semattack."""


class DimensionError(SemattackError, ValueError):
    """Array shapes do not agree."""


class InvalidRankError(DimensionError):
    """Requested rank is outside [1, d]."""


class InvalidParameterError(SemattackError, ValueError):
    """A scalar parameter is outside its admissible range."""


class UnsupportedTransformError(SemattackError, NotImplementedError):
    """The operation is not defined for this transform kind."""


class DatasetError(SemattackError, ValueError):
    """A dataset or means file is malformed."""


class ConfigError(SemattackError, ValueError):
    """A run configuration is malformed or inconsistent."""


class PreconditionError(SemattackError):
    """A theorem hypothesis does not hold.

    Carries both sides of the violated inequality ``lhs >= rhs``.
    """

    def __init__(self, message: str, lhs: float, rhs: float):
        super().__init__(f"{message} (lhs={lhs:.6g}, rhs={rhs:.6g})")
        self.lhs = lhs
        self.rhs = rhs


class AssertionFailure(SemattackError):
    """A benchmark assertion checked in ``--assert`` mode was violated."""
