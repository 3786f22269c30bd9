"""Exception types shared across the package."""


class KrdaError(Exception):
    """Base class for all errors raised by krda."""


class DimensionMismatch(KrdaError, ValueError):
    pass


class EmptyDataset(KrdaError, ValueError):
    pass


class BracketNotFound(KrdaError, ArithmeticError):
    """No interval [-2**k, 2**k] with k <= 64 brackets the requested quantile."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class NonFiniteGradient(KrdaError, FloatingPointError):
    pass


class SingleClassData(KrdaError, ValueError):
    pass


class ParseError(KrdaError, ValueError):
    """Malformed CSV input; carries the offending location."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NonFiniteValue(ParseError):
    pass
