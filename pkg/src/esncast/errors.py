"""Exception hierarchy mapped to CLI exit codes."""


class EsncastError(Exception):
    """Base class for package errors."""

    exit_code = 1


class ConfigError(EsncastError):
    """Invalid configuration or command-line usage."""

    exit_code = 2


class DataError(EsncastError):
    """Malformed or insufficient input data."""

    exit_code = 3


class NumericalError(EsncastError):
    """Numerical failure: divergence, singular system, non-convergence."""

    exit_code = 4
