"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so every raise site should pick the most
specific class available.
"""


class GeospinError(Exception):
    """Base class for all package errors."""


class FormatError(GeospinError):
    """Input text does not follow the expected file layout."""


class ParseError(FormatError):
    """A single row or field could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ChecksumError(FormatError):
    """A TLE line failed its modulo-10 checksum."""

    def __init__(self, message, line_index):
        super().__init__(f"TLE line {line_index}: {message}")
        self.line_index = line_index


class ValidationError(GeospinError):
    """A value parsed fine but lies outside its allowed range."""


class ConfigError(ValidationError):
    """Pipeline configuration problem (unknown key, missing path, bad range)."""


class DomainError(GeospinError, ValueError):
    """A numerical operation was requested outside its domain of validity."""


class SingularityError(DomainError):
    """A source-sensor separation vanished (sensor inside the source region)."""


class AlignmentError(GeospinError, ValueError):
    """Time series that must share a time base do not."""
