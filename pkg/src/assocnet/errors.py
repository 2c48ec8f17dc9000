"""Exception types shared across the package."""


class AssocnetError(Exception):
    """Base class for all package-specific errors."""


class DataError(AssocnetError, ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A line of an input stream could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class SequencingError(DataError):
    """Snapshot step indices arrived out of order."""


class ConfigError(AssocnetError, ValueError):
    """Invalid run or generator configuration."""
