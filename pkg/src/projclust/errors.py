"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 2,
NumericalError -> 3, OSError -> 4.
"""


class ProjclustError(Exception):
    """Base class for all package errors."""


class ValidationError(ProjclustError):
    """Bad inputs: malformed data, inconsistent dimensions, invalid config."""


class ParseError(ValidationError):
    """Malformed file content; message names the offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericalError(ProjclustError):
    """Numerical failure that survived the jitter-retry policy."""
