"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid combination of sizes, group counts or options."""


class DimensionError(ValueError):
    """Operator and signal shapes do not agree."""


class UnderdeterminedError(ConfigurationError):
    """A least-squares design has fewer rows than unknowns."""


class InsufficientPointsError(ValueError):
    """Too few usable points for a log-log slope fit."""

    def __init__(self, message, excluded=()):
        super().__init__(message)
        self.excluded = list(excluded)


class NumericalFailure(RuntimeError):
    """A least-squares system could not be solved even by the fallback path."""
