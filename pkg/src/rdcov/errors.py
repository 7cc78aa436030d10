"""Exception hierarchy shared by every module."""


class RDError(Exception):
    """Base class for all package errors."""


class DataError(RDError, ValueError):
    """Input data is missing, malformed, or too thin for the requested analysis."""


class InsufficientDataError(DataError):
    pass


class NumericalError(RDError, ArithmeticError):
    """A fit or test could not be computed (singular design, zero variance...)."""


class RankDeficiencyError(NumericalError):
    def __init__(self, column: int, name: str | None = None, message: str | None = None):
        self.column = column
        self.name = name
        label = f"{column} ({name})" if name else str(column)
        super().__init__(message or f"design matrix is rank deficient at column {label}")
