"""Exception types shared across the package."""


class CoSeRecError(Exception):
    """Base class for every error raised by this package."""


class ParseError(CoSeRecError):
    """An input file could not be parsed; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class EmptyDataError(CoSeRecError):
    """An operation was left with no data to work on."""


class InvalidCorpusError(CoSeRecError):
    """Interaction data cannot form a valid train/validation/test corpus."""


class NumericError(CoSeRecError):
    """A non-finite value appeared in a numeric computation."""


class ConfigError(CoSeRecError):
    """A configuration value is invalid, out of range, or unknown."""
