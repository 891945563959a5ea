"""Exception hierarchy shared across the package."""


class EillsError(Exception):
    """Base class for all package errors."""


class ValidationError(EillsError, ValueError):
    """Input data or arguments violate a documented precondition."""


class ParseError(ValidationError):
    """A data file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ValidationError):
    """A data file has the wrong header or column count."""


class ConfigurationError(EillsError, ValueError):
    """An estimator or experiment was configured inconsistently."""


class SolverError(EillsError, RuntimeError):
    """The support search could not be carried out."""


class SingularSupportError(SolverError):
    """The restricted normal system of a support is numerically singular."""

    def __init__(self, support, ratio):
        super().__init__(
            f"restricted system for support {list(support)} is singular "
            f"(eigenvalue ratio {ratio:.3g}); use singular_policy='min_norm' "
            "or check for collinear columns / too few samples"
        )
        self.support = tuple(support)
        self.ratio = ratio
