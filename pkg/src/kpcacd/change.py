"""Polar change representation: per-pixel magnitude rho and direction theta.

The magnitude is the Euclidean norm of the feature difference vector; the
direction is the arc cosine of its eigenvalue-weighted cosine against the
weight vector, so channels carrying more of the training variance dominate.
Pixels with a zero difference vector have no direction; they receive the
neutral sentinel pi/2 and always fall below any positive magnitude
threshold, so the sentinel is never consulted downstream.

The m3/m4 variants and the raw-band CVA baseline exist to reproduce the
mapping ablations: m3 uses only the two strongest channels, m4 drops the
eigenvalue weighting (the classic compressed change-vector direction).
"""

import io
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .raster import Raster
from .validation import check_raster_pair

NEUTRAL_THETA = np.pi / 2.0


@dataclass(frozen=True)
class DifferenceMap:
    """Per-pixel feature difference (h, w, c) with the channel eigenvalues."""

    values: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        if values.ndim != 3:
            raise DataError(f"difference map must be (h, w, c), got shape {values.shape}")
        if eigenvalues.shape != (values.shape[2],):
            raise DataError(
                f"{eigenvalues.size} eigenvalues for {values.shape[2]} channels"
            )
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(eigenvalues))):
            raise DataError("difference map contains non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def channels(self):
        return self.values.shape[2]


@dataclass(frozen=True)
class PolarField:
    """Per-pixel (rho, theta) grids; rho >= 0 and theta in [0, pi]."""

    rho: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        if self.rho.shape != self.theta.shape or self.rho.ndim != 2:
            raise DataError("rho and theta must be equal-shape 2-D grids")


def difference(F1, F2, eigenvalues):
    """Element-wise feature difference F1 - F2 paired with channel eigenvalues."""
    check_raster_pair(F1, F2, "feature maps")
    return DifferenceMap(F1.values - F2.values, eigenvalues)


def feature_magnitude(D):
    """Per-pixel Euclidean norm of the difference vector."""
    return np.sqrt(np.sum(D.values * D.values, axis=2))


def _direction(D_values, weights):
    """arccos of the cosine between each pixel's difference vector and weights."""
    norm_d = np.sqrt(np.sum(D_values * D_values, axis=2))
    norm_w = np.sqrt(np.sum(weights * weights))
    if norm_w == 0.0:
        raise DataError("direction weights are all zero")
    numerator = D_values @ weights
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = numerator / (norm_w * norm_d)
    theta = np.arccos(np.clip(cosine, -1.0, 1.0))
    return np.where(norm_d == 0.0, NEUTRAL_THETA, theta)


def weighted_feature_direction(D):
    """Eigenvalue-weighted direction of the difference vector, in [0, pi]."""
    return _direction(D.values, D.eigenvalues)


def direction_m4(D):
    """Unweighted direction (all channel weights equal), in [0, pi]."""
    return _direction(D.values, np.ones(D.channels))


def direction_m3(D):
    """Direction from only the two largest-eigenvalue channels, in [0, pi]."""
    if D.channels < 2:
        raise DataError("m3 direction needs at least 2 channels")
    order = np.argsort(-D.eigenvalues, kind="stable")
    d_a = D.values[:, :, order[0]]
    d_b = D.values[:, :, order[1]]
    norm = np.sqrt(d_a * d_a + d_b * d_b)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosine = d_a / norm
    theta = np.arccos(np.clip(cosine, -1.0, 1.0))
    return np.where(norm == 0.0, NEUTRAL_THETA, theta)


def cva_baseline(I1, I2):
    """Compressed change-vector analysis over raw bands: unit-weight polar field."""
    check_raster_pair(I1, I2)
    D = DifferenceMap(I1.values - I2.values, np.ones(I1.channels))
    return PolarField(feature_magnitude(D), direction_m4(D))


def polar_to_csv(field):
    """Render a polar field as CSV text with columns row,col,rho,theta."""
    out = io.StringIO()
    out.write("row,col,rho,theta\n")
    h, w = field.rho.shape
    for r in range(h):
        rho_row = field.rho[r]
        theta_row = field.theta[r]
        for c in range(w):
            out.write(f"{r},{c},{float(rho_row[c])!r},{float(theta_row[c])!r}\n")
    return out.getvalue()
