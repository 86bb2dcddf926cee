"""Exception hierarchy shared by every module of the package."""


class MGInfError(Exception):
    """Base class for all package errors."""


class DomainError(MGInfError, ValueError):
    """An argument lies outside the domain of the function."""


class RangeError(DomainError):
    """A distribution parameter violates a documented constraint."""


class ParseError(MGInfError, ValueError):
    """A distribution or grid spec string could not be parsed.

    ``position`` is the zero-based character offset of the offending token.
    """

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        if text:
            message = f"{message} (at position {position} in {text!r})"
        super().__init__(message)


class UnsupportedOperationError(MGInfError, NotImplementedError):
    """The requested operation is not available for this input."""


class NumericError(MGInfError, ArithmeticError):
    """An integrand returned a non-finite value."""

    def __init__(self, message, abscissa=None):
        self.abscissa = abscissa
        super().__init__(message)


class AccuracyError(MGInfError, ArithmeticError):
    """The requested accuracy could not be reached.

    ``estimate`` and ``abs_error`` hold the best result obtained.
    """

    def __init__(self, message, estimate=None, abs_error=None):
        self.estimate = estimate
        self.abs_error = abs_error
        super().__init__(message)


class ConsistencyError(MGInfError, ArithmeticError):
    """Two independent computations of the same quantity disagree."""
