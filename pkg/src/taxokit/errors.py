"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration problems exit 2,
backend problems exit 3, data-format problems exit 4.
"""

from __future__ import annotations


class TaxoKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(TaxoKitError):
    """Invalid configuration, missing files, bad parameters."""


class CapabilityError(ConfigurationError):
    """The configured backend cannot serve a required capability."""


class BackendError(TaxoKitError):
    """A model backend call failed.

    ``retryable`` distinguishes transport-level failures (worth retrying)
    from errors the backend itself reported.
    """

    def __init__(self, message: str, *, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class DataFormatError(TaxoKitError):
    """A data file does not match its expected format."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + where)
        self.path = path
        self.line = line


class WordNetParseError(DataFormatError):
    """A WordNet database record could not be parsed."""

    def __init__(self, message: str, *, path: str | None = None, byte_offset: int | None = None):
        where = f" at byte {byte_offset}" if byte_offset is not None else ""
        super().__init__(message + where, path=path)
        self.byte_offset = byte_offset


class GraphLookupError(TaxoKitError, KeyError):
    """A node id was not found in a taxonomy graph."""

    def __str__(self) -> str:  # KeyError quotes its repr by default
        return self.args[0] if self.args else ""
