"""Small input-validation helpers shared by the estimators."""

import numpy as np

from .errors import DataError


def as_sample_matrix(X, what):
    """Coerce to a finite float64 (n_samples, n_features) matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise DataError(f"{what}: expected a 2-D (n_samples, n_features) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{what}: non-finite values")
    return X


def check_raster_pair(r1, r2, what="rasters"):
    """Require two rasters to share height, width, and channel count."""
    if r1.shape != r2.shape:
        raise DataError(f"{what} differ in shape: {r1.shape} vs {r2.shape}")
