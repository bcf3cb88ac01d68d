"""Exception hierarchy shared by every module."""


class CensoredExpectileError(Exception):
    """Base class for all errors raised by cexpectile."""


class DimensionMismatchError(CensoredExpectileError, ValueError):
    def __init__(self, what, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected length {expected}, got {got}")


class DataError(CensoredExpectileError, ValueError):
    """Invalid input data (bad times, status codes, missing columns, ...)."""

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        super().__init__(message)


class NumericalError(CensoredExpectileError, ArithmeticError):
    """A numerical procedure could not produce a meaningful result."""
