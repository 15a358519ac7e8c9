"""Exception hierarchy for the scalevar toolkit."""


class ScaleVarError(Exception):
    """Base class for all scalevar errors."""


class ValidationError(ScaleVarError):
    """Invalid arguments, configuration, or contract violations detected up front."""


class GridError(ValidationError):
    """Grid geometry violations: off-node times, step mismatches, padding deficits."""


class DomainError(ValidationError):
    """Evaluation requested outside a path's represented time interval."""


class ExpressionError(ValidationError):
    """Expression parsing or differentiation failure, with a 1-based source column."""

    def __init__(self, message: str, column: int | None = None):
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message)
        self.column = column


class NumericalError(ScaleVarError):
    """Numerical breakdown at run time: NaN, divergence, degenerate data."""
