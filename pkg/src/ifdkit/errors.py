"""Exception hierarchy shared by the library, service, and CLI.

The CLI maps these to process exit codes (config 2, backend 3, data 4);
the service maps them to HTTP statuses. Everything raised on purpose by
this package derives from ToolError.
"""

from __future__ import annotations


class ToolError(Exception):
    """Base class for all ifdkit errors."""

    exit_code = 1
    wire_type = "error"


class ConfigError(ToolError):
    """Invalid configuration: bad ratios, zero budgets, malformed specs."""

    exit_code = 2
    wire_type = "configuration"


class BackendError(ToolError):
    """A scorer or embedding backend failed (timeout, HTTP error, refusal)."""

    exit_code = 3
    wire_type = "backend"


class DataError(ToolError):
    """Malformed or invalid data: parse failures, invariant violations."""

    exit_code = 4
    wire_type = "data"


class DegenerateRankingError(DataError):
    """Rank correlation is undefined because one input has zero rank variance."""


WIRE_TYPES = {
    ConfigError.wire_type: ConfigError,
    BackendError.wire_type: BackendError,
    DataError.wire_type: DataError,
}


def error_from_wire(wire_type: str, message: str) -> ToolError:
    """Rebuild a typed error from its service representation."""
    return WIRE_TYPES.get(wire_type, ToolError)(message)
