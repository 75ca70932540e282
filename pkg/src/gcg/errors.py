"""Exception hierarchy shared across the package."""


class GCGError(Exception):
    """Base class for all package errors."""


class ConfigError(GCGError, ValueError):
    """Invalid configuration: shapes, ranges, unknown keys, bad presets."""


class UsageError(GCGError, RuntimeError):
    """An API was called in a state where it cannot do anything useful."""


class TrainingError(GCGError, RuntimeError):
    """Training produced a non-finite loss or gradient."""


class ParseError(GCGError, ValueError):
    """A world or config file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path


class InvariantError(GCGError, ValueError):
    """A domain object violates one of its invariants."""
