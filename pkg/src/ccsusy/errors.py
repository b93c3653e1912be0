"""Exception types raised across the package."""


class ScatteringError(Exception):
    """Base class for numerical failures in this package."""


class SingularJost(ScatteringError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NotUnitary(ScatteringError):
    pass


class NotSymmetric(ScatteringError):
    pass


class SingularSigma(ScatteringError):
    """The factorization solution is singular at some radius."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class SingularY(SingularSigma):
    pass


class SymmetryViolated(ScatteringError):
    pass


class SingularD22(ScatteringError):
    pass


class RankDeficientPivot(ScatteringError):
    pass


class PreconditionViolated(ScatteringError):
    pass


class RankDrop(ScatteringError):
    pass


class StepUnstable(ScatteringError):
    pass


class IllConditionedMatch(ScatteringError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConfigError(ValueError):
    """Invalid run configuration. ``field`` names the offending entry."""

    def __init__(self, message, field=None):
        if field:
            message = f"{field}: {message}"
        super().__init__(message)
        self.field = field
