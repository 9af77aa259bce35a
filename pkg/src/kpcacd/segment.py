"""Decision layer: threshold the magnitude, cluster the direction.

Binary maps come from thresholding rho (Otsu over a 256-bin histogram, or
two-cluster k-means); multi-class maps additionally cluster theta over the
changed pixels only and relabel clusters by ascending center so ids are
stable across runs. The m1/m2 ablations instead cluster the raw difference
vectors jointly over change and non-change.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .change import DifferenceMap, PolarField

OTSU_BINS = 256
KMEANS_TOL = 1e-9
KMEANS_MAX_ITER = 300


@dataclass(frozen=True)
class ChangeMap:
    """Integer label grid: 0 = non-change, 1..n_classes = change classes."""

    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 2:
            raise DataError(f"change map must be 2-D, got shape {labels.shape}")
        if self.n_classes < 1:
            raise DataError(f"change map needs n_classes >= 1, got {self.n_classes}")
        if labels.min(initial=0) < 0 or labels.max(initial=0) > self.n_classes:
            raise DataError(
                f"labels outside 0..{self.n_classes}: "
                f"[{labels.min()}, {labels.max()}]"
            )
        object.__setattr__(self, "labels", labels)

    @property
    def shape(self):
        return self.labels.shape


def otsu_threshold(values):
    """Threshold maximizing between-class variance of the min-max scaled data.

    Builds a 256-bin histogram on [0, 1]; candidate thresholds are the bin
    boundaries and ties go to the lowest one. The returned threshold is
    mapped back to the original units.
    """
    flat = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = flat.min(), flat.max()
    if lo == hi:
        raise DataError("constant input: no threshold separates a single value")
    scaled = (flat - lo) / (hi - lo)
    bins = np.minimum((scaled * OTSU_BINS).astype(np.int64), OTSU_BINS - 1)
    hist = np.bincount(bins, minlength=OTSU_BINS).astype(np.float64)

    total = hist.sum()
    cum_count = np.cumsum(hist)
    cum_mass = np.cumsum(hist * np.arange(OTSU_BINS))
    # Candidate i splits bins [0, i) from [i, 256), i = 1..255.
    w0 = cum_count[:-1] / total
    w1 = 1.0 - w0
    with np.errstate(invalid="ignore", divide="ignore"):
        mu0 = cum_mass[:-1] / cum_count[:-1]
        mu1 = (cum_mass[-1] - cum_mass[:-1]) / (total - cum_count[:-1])
        variance = w0 * w1 * (mu0 - mu1) ** 2
    variance[~np.isfinite(variance)] = 0.0
    best = int(np.argmax(variance)) + 1
    return float(lo + (best / OTSU_BINS) * (hi - lo))


def _kmeans_pp_centers(data, k, rng):
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    chosen = np.zeros(n, dtype=bool)
    first = int(rng.integers(n))
    centers[0] = data[first]
    chosen[first] = True
    d_sq = np.sum((data - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        weight = d_sq.sum()
        if weight > 0.0:
            idx = int(rng.choice(n, p=d_sq / weight))
        else:
            # All remaining mass sits on chosen points (duplicates); take the
            # lowest-index point not yet used so centers stay distinct.
            idx = int(np.argmin(chosen))
        centers[j] = data[idx]
        chosen[idx] = True
        d_sq = np.minimum(d_sq, np.sum((data - centers[j]) ** 2, axis=1))
    return centers


def kmeans(data, k, seed, return_inertia=False):
    """Deterministic k-means: k-means++ seeding, Lloyd updates, seeded RNG.

    Iterates until the largest center movement drops below 1e-9 or 300
    iterations; a cluster left empty is re-seeded to the point farthest from
    its assigned center. Returns (assignments, centers) and optionally the
    per-iteration inertia history.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    n = data.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_centers(data, k, rng)

    inertia_history = []
    for _ in range(KMEANS_MAX_ITER):
        d_sq = np.sum((data[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(d_sq, axis=1)
        nearest = d_sq[np.arange(n), labels]
        inertia_history.append(float(nearest.sum()))

        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if np.any(members):
                new_centers[j] = data[members].mean(axis=0)
        taken = np.zeros(n, dtype=bool)
        for j in range(k):
            if not np.any(labels == j):
                far_order = np.argsort(-nearest, kind="stable")
                for idx in far_order:
                    if not taken[idx]:
                        new_centers[j] = data[idx]
                        taken[idx] = True
                        break
        movement = np.sqrt(np.max(np.sum((new_centers - centers) ** 2, axis=1)))
        centers = new_centers
        if movement < KMEANS_TOL:
            break

    d_sq = np.sum((data[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d_sq, axis=1)
    if return_inertia:
        return labels, centers, inertia_history
    return labels, centers


def binary_map(rho, method, seed=0):
    """Label pixels with magnitude above the learned split as changed (1)."""
    rho = np.asarray(rho, dtype=np.float64)
    if method == "otsu":
        threshold = otsu_threshold(rho)
        labels = (rho > threshold).astype(np.int64)
    elif method == "kmeans2":
        if rho.min() == rho.max():
            raise DataError("constant input: no threshold separates a single value")
        assignments, centers = kmeans(rho.ravel()[:, None], 2, seed)
        changed_cluster = int(np.argmax(centers[:, 0]))
        labels = (assignments == changed_cluster).astype(np.int64).reshape(rho.shape)
    else:
        raise DataError(f"unknown binary segmentation method {method!r}")
    return ChangeMap(labels, 1)


def multiclass_map(polar, k_changes, method, seed=0):
    """Threshold rho, then cluster theta of the changed pixels into classes.

    Change classes are relabeled 1..K by ascending cluster center, so label
    ids do not depend on the clustering seed.
    """
    if k_changes < 2:
        raise DataError("multi-class mapping needs k_changes >= 2; use binary_map")
    binary = binary_map(polar.rho, method, seed)
    changed = binary.labels == 1
    n_changed = int(changed.sum())
    if n_changed < k_changes:
        raise DataError(f"only {n_changed} changed pixels for {k_changes} classes")
    theta = polar.theta[changed]
    assignments, centers = kmeans(theta[:, None], k_changes, seed)
    order = np.argsort(centers[:, 0], kind="stable")
    relabel = np.empty(k_changes, dtype=np.int64)
    relabel[order] = np.arange(1, k_changes + 1)
    labels = np.zeros(polar.rho.shape, dtype=np.int64)
    labels[changed] = relabel[assignments]
    return ChangeMap(labels, k_changes)


def multiclass_map_m1_m2(D, k_total, weighted, seed=0):
    """Cluster raw difference vectors jointly over change and non-change.

    With weighted=True each channel is scaled by its eigenvalue first. The
    cluster whose center has the smallest norm becomes non-change (0); the
    rest are numbered by ascending center norm.
    """
    if k_total < 2:
        raise DataError("joint clustering needs k_total >= 2")
    h, w, c = D.values.shape
    X = D.values.reshape(h * w, c)
    if weighted:
        X = X * D.eigenvalues[None, :]
    assignments, centers = kmeans(X, k_total, seed)
    norms = np.sqrt(np.sum(centers * centers, axis=1))
    order = np.argsort(norms, kind="stable")
    relabel = np.empty(k_total, dtype=np.int64)
    relabel[order] = np.arange(k_total)
    labels = relabel[assignments].reshape(h, w)
    return ChangeMap(labels, k_total - 1)
