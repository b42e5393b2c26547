"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ParameterError(ValueError):
    """A distribution or model parameter is invalid."""


class DegenerateFrequencyError(ValueError):
    """The observed frequency sits on the boundary {0, 1}."""


class FormatError(ValueError):
    """An input file does not follow the expected layout."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""


class DegenerateFrequencyWarning(UserWarning):
    """Likelihood evaluated at a boundary frequency; no interior maximizer."""


class DataQualityWarning(UserWarning):
    """Input rows were rejected, deduplicated or masked."""
