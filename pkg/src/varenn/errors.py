"""Exception hierarchy for the varenn pipeline.

Every error raised by this package derives from :class:`VarennError` so the
CLI can map failures onto stable exit-code categories.
"""


class VarennError(Exception):
    """Base class for all varenn errors."""


class FormatError(VarennError):
    """A binary file does not follow its declared format (bad magic, version)."""


class LengthError(FormatError):
    """A binary payload is truncated or longer than its header declares."""


class ValidationError(VarennError):
    """A value or data structure violates a documented invariant."""


class DomainError(VarennError):
    """An argument is outside the mathematical domain of an operation."""


class ConfigurationError(VarennError):
    """A configuration value is unusable (e.g. image size not divisible)."""


class ShapeError(VarennError):
    """Tensor shapes are inconsistent with the configured network."""


class ConsistencyError(VarennError):
    """Cached intermediate state does not match the objects it was built from."""


class StatisticsError(VarennError):
    """A statistic is unavailable (e.g. a variable has no observed values)."""


class UndefinedKappaError(StatisticsError):
    """Weighted kappa is undefined because the expected agreement is degenerate."""


class DegenerateRegressorError(StatisticsError):
    """Least squares cannot be fit because the regressor is constant."""


class MissingDataError(VarennError):
    """A window touches missing values and must be excluded, not imputed."""


class SplitError(VarennError):
    """Too few grid cells to form train/validation/test subsets."""


class EmptyDatasetError(VarennError):
    """Dataset construction produced zero usable samples."""
