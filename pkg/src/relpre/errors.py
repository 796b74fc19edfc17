"""Error taxonomy shared across the package, mapped to CLI exit codes."""


class RelpreError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(RelpreError):
    """Invalid or incompatible configuration (exit code 2)."""

    exit_code = 2


class DataError(RelpreError):
    """Invalid, corrupt or missing data (exit code 3)."""

    exit_code = 3


class NumericError(RelpreError):
    """Non-finite values or diverging optimization (exit code 4)."""

    exit_code = 4
