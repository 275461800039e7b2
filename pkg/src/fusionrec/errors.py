"""Exception hierarchy shared across the package.

Each class carries the process exit code the CLI maps it to:
0 success, 2 usage/config, 3 data, 4 transport, 5 numeric failure.
"""


class FusionRecError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(FusionRecError):
    """Bad configuration, bad flags, malformed templates."""

    exit_code = 2


class DataError(FusionRecError):
    """Malformed or unusable input data (parse errors, empty corpora)."""

    exit_code = 3


class TransportError(FusionRecError):
    """Endpoint unreachable or failing after bounded retries."""

    exit_code = 4

    def __init__(self, message, item_key=None):
        super().__init__(message)
        self.item_key = item_key


class GenerationError(TransportError):
    """The service answered but produced an unusable (e.g. empty) response."""


class NumericError(FusionRecError):
    """Non-finite losses or other numeric breakdown during training."""

    exit_code = 5


class InternalError(FusionRecError):
    """Invariant violation that indicates a bug, not a user mistake."""
