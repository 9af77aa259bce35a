"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class KpcacdError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(KpcacdError):
    """Invalid run configuration (bad JSON, missing keys, out-of-range values)."""


class DataError(KpcacdError):
    """Invalid input data (unreadable files, shape mismatches, degenerate bands)."""


class NumericalError(KpcacdError):
    """Numerical failure (deficient spectra, non-convergence)."""
