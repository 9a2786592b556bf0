"""Error categories shared by the library and the command line. Each category
maps to a distinct process exit status so scripts can tell I/O trouble apart
from bad input and from numerical failure."""

__all__ = [
    'SalflowError',
    'SequenceIOError',
    'ValidationError',
    'UndefinedClassifierError',
    'NumericalError',
    'NSSUndefinedError',
]


class SalflowError(Exception):
    category = 'error'
    exit_code = 1


class SequenceIOError(SalflowError, IOError):
    """Missing, undecodable or truncated files; malformed headers."""
    category = 'io'
    exit_code = 3


class ValidationError(SalflowError, ValueError):
    """Input that violates a documented precondition."""
    category = 'validation'
    exit_code = 4


class UndefinedClassifierError(ValidationError):
    """AUC requested for a mask that is all true or all false."""


class NumericalError(SalflowError, ArithmeticError):
    """Non-finite or diverging solver state."""
    category = 'numerical'
    exit_code = 5


class NSSUndefinedError(NumericalError):
    category = 'nss-undefined'

    def __init__(self, message="NSS undefined: saliency map is constant"):
        super().__init__(message)
