"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
"""


class DataError(ValueError):
    """Invalid input data or a violated validation contract."""


class ManifestError(DataError):
    """Malformed manifest file or record."""


class FormatError(DataError):
    """Malformed binary feature or model file."""


class UndefinedMetricError(DataError):
    """A metric has no defined value for the given inputs (e.g. zero variance)."""


class NumericError(RuntimeError):
    """Non-finite value encountered where finite math is required."""
