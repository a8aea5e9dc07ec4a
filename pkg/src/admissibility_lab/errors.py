"""Exception hierarchy shared by the lab modules."""


class LabError(Exception):
    """Base class for every error raised by admissibility_lab."""


class DimensionError(LabError, ValueError):
    pass


class UnsupportedRegionError(LabError, TypeError):
    pass


class InvalidRuleError(LabError, ValueError):
    pass


class ConstraintViolationError(LabError, ValueError):
    """A point that must lie in the feasible region does not."""


class NumericalError(LabError, ArithmeticError):
    """Factorization failure, singular matrix or an undefined numerical result."""


class ConfigError(LabError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
