"""Exception types raised by the library."""


class CateLassoError(Exception):
    """Base class for all library-specific errors."""


class EmptyArmError(CateLassoError):
    """A treatment arm has no observations."""


class MissingPropensityError(CateLassoError):
    """An operation needs propensity scores and none are available."""


class PropensityOutOfRangeError(CateLassoError):
    """Propensity scores must lie strictly inside (0, 1)."""


class MissingTruthError(CateLassoError):
    """An operation needs ground-truth coefficients and none are attached."""


class DimensionMismatchError(CateLassoError):
    """Array shapes do not agree with the fitted model or data."""


class NonFiniteProductError(CateLassoError):
    """The cross-design pseudoinverse product contains non-finite entries."""


class NegativeDiagonalError(CateLassoError):
    """A Gram matrix has a materially negative diagonal entry."""


class CsvParseError(CateLassoError):
    """A dataset CSV file does not follow the expected schema."""


class MissingTreatmentColumnError(CateLassoError):
    """A covariate CSV lacks a treatment column and none was synthesized."""


class ConfigError(CateLassoError):
    """An experiment configuration is malformed or inconsistent."""
