"""Exception hierarchy shared by all modules.

Exit-code mapping for the CLI: FormatError -> 2, DataError (and
subclasses) -> 3, ConfigurationError -> 4.
"""


class ToolError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class FormatError(ToolError):
    """An input file does not conform to its declared format."""

    exit_code = 2


class DataError(ToolError):
    """Input parses but is semantically inconsistent or unusable."""

    exit_code = 3


class DomainError(DataError):
    """A value lies outside the domain an operation accepts."""


class DegenerateModelError(DataError):
    """Training data cannot support a model (e.g. a single class)."""


class ConfigurationError(ToolError):
    """The requested run configuration cannot be satisfied."""

    exit_code = 4
