"""Error taxonomy shared by the library and the CLI exit codes."""


class GcmlError(Exception):
    exit_code = 1


class UsageError(GcmlError):
    """Bad flags, unknown config keys, invalid option values."""

    exit_code = 1


class DataError(GcmlError):
    """Missing or malformed files, datasets, checkpoints."""

    exit_code = 2


class NumericError(GcmlError):
    """Non-finite losses, failed verification suites."""

    exit_code = 3
