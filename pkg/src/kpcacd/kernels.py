"""Kernel evaluation, Gram matrix construction, and Gram centering.

Conventions: sample matrices in this module hold one vectorized patch per
column, matching PatchSet. Centering of test-side kernel columns against the
training Gram statistics is explicit here because projecting new patches
through a centered-Gram eigenbasis is biased without it.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError
from .raster import PatchSet

KERNEL_KINDS = ("linear", "rbf", "polynomial", "sigmoid", "cosine")

# parameter name -> kinds that use it
_PARAM_KINDS = {
    "gamma": ("rbf",),
    "degree": ("polynomial",),
    "offset": ("polynomial", "sigmoid"),
    "scale": ("sigmoid",),
}


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family plus its parameters.

    Parameters left as None are filled by resolve(): the RBF bandwidth
    defaults to gamma = 1 / (2 * median pairwise squared distance) of the
    training patches, polynomial to degree 3 / offset 1, sigmoid to
    scale 1/dim / offset 0.
    """

    kind: str
    gamma: float | None = None
    degree: int | None = None
    offset: float | None = None
    scale: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}, expected one of {KERNEL_KINDS}")
        for param in _PARAM_KINDS:
            value = getattr(self, param)
            if value is not None and self.kind not in _PARAM_KINDS[param]:
                raise ConfigError(f"{self.kind} kernel takes no {param!r} parameter")
        if self.gamma is not None and self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if self.degree is not None and (int(self.degree) != self.degree or self.degree < 1):
            raise ConfigError(f"degree must be a positive integer, got {self.degree}")

    def resolve(self, train):
        """Return a copy with data-dependent defaults filled in from training patches."""
        train = _as_columns(train)
        if self.kind == "rbf" and self.gamma is None:
            sigma_sq = median_sq_dist(train)
            return replace(self, gamma=1.0 / (2.0 * sigma_sq))
        if self.kind == "polynomial":
            return replace(
                self,
                degree=3 if self.degree is None else self.degree,
                offset=1.0 if self.offset is None else self.offset,
            )
        if self.kind == "sigmoid":
            return replace(
                self,
                scale=1.0 / train.shape[0] if self.scale is None else self.scale,
                offset=0.0 if self.offset is None else self.offset,
            )
        return self

    def _require(self, *params):
        for param in params:
            if getattr(self, param) is None:
                raise ConfigError(f"{self.kind} kernel parameter {param!r} is unresolved")


@dataclass(frozen=True)
class GramMatrix:
    """An M x M symmetric kernel matrix with a centering flag."""

    values: np.ndarray
    centered: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DataError(f"Gram matrix must be square, got shape {values.shape}")
        scale = max(np.max(np.abs(values)), 1.0)
        if np.max(np.abs(values - values.T)) > 1e-12 * scale:
            raise DataError("Gram matrix is not symmetric")
        object.__setattr__(self, "values", values)

    @property
    def size(self):
        return self.values.shape[0]


def _as_columns(X):
    if isinstance(X, PatchSet):
        return X.vectors
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return X[:, None]
    return X


def median_sq_dist(X):
    """Median pairwise squared distance among columns of X (a positive value).

    Falls back to the mean of the positive distances when the median is zero
    (duplicate-heavy sets), and to 1.0 when every pair coincides.
    """
    d_sq = _cross_sq_dists(X, X)
    pairs = d_sq[np.triu_indices(X.shape[1], k=1)]
    med = float(np.median(pairs)) if pairs.size else 0.0
    if med > 0.0:
        return med
    positive = pairs[pairs > 0.0]
    return float(positive.mean()) if positive.size else 1.0


def _cross_sq_dists(X, Y):
    sq_x = np.sum(X * X, axis=0)
    sq_y = np.sum(Y * Y, axis=0)
    d_sq = sq_x[:, None] + sq_y[None, :] - 2.0 * (X.T @ Y)
    return np.maximum(d_sq, 0.0)


def kernel_eval(spec, x, y):
    """Evaluate the kernel on a single vector pair."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise DataError(f"kernel arguments differ in dimension: {x.shape[0]} vs {y.shape[0]}")
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "rbf":
        spec._require("gamma")
        diff = x - y
        return float(np.exp(-spec.gamma * (diff @ diff)))
    if spec.kind == "polynomial":
        spec._require("degree", "offset")
        return float((x @ y + spec.offset) ** spec.degree)
    if spec.kind == "sigmoid":
        spec._require("scale", "offset")
        return float(np.tanh(spec.scale * (x @ y) + spec.offset))
    # cosine
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        raise DataError("cosine kernel is undefined for zero vectors")
    return float((x @ y) / (nx * ny))


def kernel_matrix(spec, X, Y):
    """All kernel values between columns of X and columns of Y, shape (X cols, Y cols)."""
    X, Y = _as_columns(X), _as_columns(Y)
    if X.shape[0] != Y.shape[0]:
        raise DataError(f"kernel arguments differ in dimension: {X.shape[0]} vs {Y.shape[0]}")
    if spec.kind == "linear":
        return X.T @ Y
    if spec.kind == "rbf":
        spec._require("gamma")
        return np.exp(-spec.gamma * _cross_sq_dists(X, Y))
    if spec.kind == "polynomial":
        spec._require("degree", "offset")
        return (X.T @ Y + spec.offset) ** spec.degree
    if spec.kind == "sigmoid":
        spec._require("scale", "offset")
        return np.tanh(spec.scale * (X.T @ Y) + spec.offset)
    norms_x = np.linalg.norm(X, axis=0)
    norms_y = np.linalg.norm(Y, axis=0)
    if np.any(norms_x == 0.0) or np.any(norms_y == 0.0):
        raise DataError("cosine kernel is undefined for zero vectors")
    return (X.T @ Y) / np.outer(norms_x, norms_y)


def gram(spec, P):
    """Kernel matrix among all patch pairs of P (uncentered).

    The matrix is exactly symmetrized; for distance-based kernels the
    diagonal is pinned to its analytic value of 1.
    """
    X = _as_columns(P)
    if X.shape[1] < 2:
        raise DataError(f"Gram construction needs at least 2 patches, got {X.shape[1]}")
    K = kernel_matrix(spec, X, X)
    K = 0.5 * (K + K.T)
    if spec.kind in ("rbf", "cosine"):
        np.fill_diagonal(K, 1.0)
    return GramMatrix(K, centered=False)


def center_gram(K):
    """Center a Gram matrix so the implicit feature maps have zero mean.

    Equivalent to K - (1/M) 1 K - (1/M) K 1 + (1/M^2) 1 K 1 with 1 the
    all-ones M x M matrix.
    """
    if K.centered:
        raise DataError("Gram matrix is already centered")
    values = K.values
    row_means = values.mean(axis=1)
    col_means = values.mean(axis=0)
    grand = values.mean()
    centered = values - row_means[:, None] - col_means[None, :] + grand
    return GramMatrix(0.5 * (centered + centered.T), centered=True)


def gram_centering_stats(K):
    """(row_means, grand_mean) of an uncentered training Gram, for test centering."""
    if K.centered:
        raise DataError("centering statistics must come from the uncentered Gram")
    return K.values.mean(axis=1), float(K.values.mean())


def center_test_kernel_with_stats(k_test, row_means, grand_mean):
    """Center test kernel columns given training-Gram row means and grand mean."""
    k_test = np.asarray(k_test, dtype=np.float64)
    row_means = np.asarray(row_means, dtype=np.float64)
    if k_test.shape[0] != row_means.shape[0]:
        raise DataError(
            f"test kernel length {k_test.shape[0]} does not match training size {row_means.shape[0]}"
        )
    if k_test.ndim == 1:
        return k_test - k_test.mean() - row_means + grand_mean
    return k_test - k_test.mean(axis=0)[None, :] - row_means[:, None] + grand_mean


def center_test_kernel(K_train, k_test):
    """Center kernel values between training patches and test patches.

    k_test holds k(x_i, y) for the M training patches x_i (one column per
    test patch y); the result is (Phi(x_i) - mu) . (Phi(y) - mu) expressed
    through the uncentered training Gram K_train.
    """
    row_means, grand_mean = gram_centering_stats(K_train)
    return center_test_kernel_with_stats(k_test, row_means, grand_mean)
