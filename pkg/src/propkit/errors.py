"""Shared exception types.

The CLI maps these onto process exit codes: usage problems exit 1,
:class:`FormatError` / :class:`ConfigError` and I/O failures exit 2,
:class:`NumericalError` exits 3.
"""


class PropkitError(Exception):
    """Base class for all toolkit errors."""


class FormatError(PropkitError):
    """Malformed input data (bad TSV row, bad record shape, bad offsets)."""

    @classmethod
    def at(cls, path, lineno, message):
        return cls(f"{path}:{lineno}: {message}")


class ConfigError(PropkitError):
    """Inconsistent configuration, e.g. a rule needs a label the technique set lacks."""


class NumericalError(PropkitError):
    """Training or inference produced a non-finite objective."""
