"""Kernel-PCA and linear-PCA patch transforms, the core of a convolution layer.

Both estimators follow the scikit-learn protocol: fit on an
(n_samples, n_features) matrix of vectorized patches, transform to
(n_samples, n_components) feature scores. KpcaConv solves the centered-Gram
eigenproblem M * lambda * alpha = K~ alpha and normalizes coefficient columns
to alpha_j . alpha_j = 1 / ell_j (ell_j the centered-Gram eigenvalue), which
makes the variance of training scores along component j equal lambda_j.
With a linear kernel the scores coincide with PcaConv's up to sign.
"""

import base64
import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import kernels
from .errors import DataError, NumericalError
from .linalg import sym_eig
from .validation import as_sample_matrix

# Relative floor below which centered-Gram eigenvalues count as zero; guards
# the 1/sqrt(ell) normalization against numerically null directions.
EIGENVALUE_FLOOR = 1e-10


def _positive_spectrum(eigenvalues, n_components, what):
    top = eigenvalues[0] if eigenvalues.size else 0.0
    if top <= 0.0:
        retained = 0
    else:
        retained = int(np.sum(eigenvalues > EIGENVALUE_FLOOR * top))
    if retained < n_components:
        raise NumericalError(
            f"{what}: only {retained} positive components available, "
            f"{n_components} requested"
        )
    return retained


class KpcaConv(TransformerMixin, BaseEstimator):
    """Kernel-PCA transform over vectorized patches.

    Parameters
    ----------
    n_components : int
        Number of leading components p to keep.
    kernel : str or KernelSpec
        Kernel family; one of linear, rbf, polynomial, sigmoid, cosine.
    gamma, degree, offset, scale : optional kernel parameters
        Used when `kernel` is a string; None selects data-driven defaults
        (see KernelSpec.resolve).
    """

    def __init__(self, n_components=8, kernel="rbf", gamma=None, degree=None,
                 offset=None, scale=None):
        self.n_components = n_components
        self.kernel = kernel
        self.gamma = gamma
        self.degree = degree
        self.offset = offset
        self.scale = scale

    def _spec(self):
        if isinstance(self.kernel, kernels.KernelSpec):
            return self.kernel
        return kernels.KernelSpec(
            self.kernel, gamma=self.gamma, degree=self.degree,
            offset=self.offset, scale=self.scale,
        )

    def fit(self, X, y=None):
        X = as_sample_matrix(X, "training patches")
        if self.n_components < 1:
            raise ValueError(f"n_components must be >= 1, got {self.n_components}")
        if X.shape[0] < self.n_components + 1:
            raise ValueError(
                f"need at least {self.n_components + 1} training patches for "
                f"{self.n_components} components, got {X.shape[0]}"
            )
        train = np.ascontiguousarray(X.T)
        spec = self._spec().resolve(train)
        K = kernels.gram(spec, train)
        row_means, grand_mean = kernels.gram_centering_stats(K)
        K_centered = kernels.center_gram(K)
        eig = sym_eig(K_centered.values)
        _positive_spectrum(eig.eigenvalues, self.n_components, "kernel PCA fit")

        m = train.shape[1]
        ell = eig.eigenvalues[: self.n_components]
        self.alpha_ = eig.eigenvectors[:, : self.n_components] / np.sqrt(ell)
        self.eigenvalues_ = ell / m
        self.train_patches_ = train
        self.kernel_spec_ = spec
        self.row_means_ = row_means
        self.grand_mean_ = grand_mean
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "alpha_")
        X = as_sample_matrix(X, "patches")
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"patch dimension {X.shape[1]} does not match the fitted "
                f"dimension {self.n_features_in_}"
            )
        k_test = kernels.kernel_matrix(self.kernel_spec_, self.train_patches_, X.T)
        k_test = kernels.center_test_kernel_with_stats(
            k_test, self.row_means_, self.grand_mean_
        )
        return (self.alpha_.T @ k_test).T

    # -- serialization ------------------------------------------------------

    def to_json(self):
        """Serialize the fitted model to a JSON string (see README for fields)."""
        check_is_fitted(self, "alpha_")
        spec = self.kernel_spec_
        payload = base64.b64encode(
            np.ascontiguousarray(self.train_patches_, dtype="<f8").tobytes()
        ).decode("ascii")
        doc = {
            "kernel": {
                "kind": spec.kind,
                **{
                    p: getattr(spec, p)
                    for p in ("gamma", "degree", "offset", "scale")
                    if getattr(spec, p) is not None
                },
            },
            "n_components": int(self.alpha_.shape[1]),
            "alpha": [[float(v) for v in row] for row in self.alpha_],
            "eigenvalues": [float(v) for v in self.eigenvalues_],
            "row_means": [float(v) for v in self.row_means_],
            "grand_mean": float(self.grand_mean_),
            "train_patches": {
                "shape": list(self.train_patches_.shape),
                "dtype": "f64",
                "encoding": "base64",
                "data": payload,
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        spec = kernels.KernelSpec(**doc["kernel"])
        model = cls(n_components=doc["n_components"], kernel=spec)
        shape = tuple(doc["train_patches"]["shape"])
        raw = base64.b64decode(doc["train_patches"]["data"])
        model.train_patches_ = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        model.alpha_ = np.array(doc["alpha"], dtype=np.float64)
        model.eigenvalues_ = np.array(doc["eigenvalues"], dtype=np.float64)
        model.row_means_ = np.array(doc["row_means"], dtype=np.float64)
        model.grand_mean_ = float(doc["grand_mean"])
        model.kernel_spec_ = spec
        model.n_features_in_ = shape[0]
        return model

    def save(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


class PcaConv(TransformerMixin, BaseEstimator):
    """Linear PCA transform over vectorized patches (explicit filter bank).

    Fitting eigendecomposes the population covariance of the mean-centered
    patches; the leading eigenvectors, reshaped to the patch window, are the
    convolution filters.
    """

    def __init__(self, n_components=8):
        self.n_components = n_components

    def fit(self, X, y=None):
        X = as_sample_matrix(X, "training patches")
        if self.n_components < 1:
            raise ValueError(f"n_components must be >= 1, got {self.n_components}")
        if X.shape[0] < self.n_components + 1:
            raise ValueError(
                f"need at least {self.n_components + 1} training patches for "
                f"{self.n_components} components, got {X.shape[0]}"
            )
        self.mean_ = X.mean(axis=0)
        centered = X - self.mean_
        cov = (centered.T @ centered) / X.shape[0]
        eig = sym_eig(0.5 * (cov + cov.T))
        _positive_spectrum(eig.eigenvalues, self.n_components, "PCA fit")
        self.filters_ = eig.eigenvectors[:, : self.n_components].T.copy()
        self.eigenvalues_ = eig.eigenvalues[: self.n_components].copy()
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "filters_")
        X = as_sample_matrix(X, "patches")
        if X.shape[1] != self.n_features_in_:
            raise DataError(
                f"patch dimension {X.shape[1]} does not match the fitted "
                f"dimension {self.n_features_in_}"
            )
        return (X - self.mean_) @ self.filters_.T

    def filter_bank(self, patch_h, patch_w, channels):
        """Filters reshaped to (n_components, patch_h, patch_w, channels)."""
        check_is_fitted(self, "filters_")
        if patch_h * patch_w * channels != self.filters_.shape[1]:
            raise DataError("patch geometry does not match the fitted dimension")
        per_band = self.filters_.reshape(-1, channels, patch_h, patch_w)
        return np.ascontiguousarray(per_band.transpose(0, 2, 3, 1))
