"""Exception types shared across the package."""


class PanelDbnError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PanelDbnError):
    """Inputs or arguments violate a documented precondition."""


class ParseError(ValidationError):
    """Malformed tabular input; the message carries the offending line number."""


class ConfigurationError(ValidationError):
    """A mapping or option references something that does not exist."""


class MissingDataError(ValidationError):
    """Missing values are present where a complete panel is required."""


class InsufficientDataError(ValidationError):
    """Too few rows or observed values to fit, impute, or split."""


class PlacementError(ValidationError):
    """A requested missingness pattern cannot be placed in the series."""


class SingularDesignError(PanelDbnError):
    """The regression design matrix is rank deficient."""


class DegenerateModelError(PanelDbnError):
    """Residual variance collapsed to numerical zero; the likelihood is unbounded."""


class InstabilityError(PanelDbnError):
    """Simulated dynamics diverged."""


class AggregateError(PanelDbnError):
    """Too many bootstrap replicates failed to produce a graph."""
