"""Exception taxonomy.

Every failure the library can diagnose maps to one of these classes so the
CLI can translate them into stable exit codes (data errors vs. solver
divergence).
"""


class DynamoError(Exception):
    """Base class for all library errors."""


class DataError(DynamoError):
    """Malformed or inconsistent input data (files, configs, shapes)."""


class BadMagicError(DataError):
    """Tensor file does not start with the expected magic tag."""


class TruncatedPayloadError(DataError):
    """Tensor file payload is shorter (or longer) than the header declares."""


class UnsupportedDtypeError(DataError):
    """Tensor file declares a dtype code this library does not know."""


class ConfigError(DataError):
    """Run configuration is malformed or out of range."""


class SolverDivergenceError(DynamoError):
    """Iteration produced a non-finite cost, or the linesearch stalled.

    Carries the trace collected up to the failure for post-mortem.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
