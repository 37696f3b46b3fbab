"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
ComputationError -> 4.
"""


class EpicurveError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EpicurveError):
    """Invalid configuration or unknown column/feature reference."""


class DataError(EpicurveError):
    """Malformed or inconsistent input data (parse errors, gaps, duplicates)."""


class ComputationError(EpicurveError):
    """A computation cannot proceed (degenerate column, all-zero series, ...)."""
