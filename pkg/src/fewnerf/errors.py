"""Exception types shared across the package.

Plain ``ValueError`` is used for local precondition violations (bad
arguments, shape mismatches).  The classes below exist so the CLI can map
failures to distinct exit codes.
"""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent (exit code 1)."""


class DataError(RuntimeError):
    """Input data on disk is missing, malformed, or incompatible (exit code 2)."""


class NumericalAbort(FloatingPointError):
    """Training hit a non-finite value and was aborted (exit code 3)."""
