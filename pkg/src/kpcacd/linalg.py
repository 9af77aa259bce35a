"""Deterministic dense symmetric eigendecomposition.

The solver is a row-cyclic Jacobi iteration with per-rotation thresholding.
It is intentionally self-contained: the Gram matrices this package produces
are at most a few hundred rows, and a fixed rotation order plus a fixed sign
convention make eigenvector-dependent results reproducible bit-for-bit
across runs.

The sweep loop is JIT-compiled with numba when available (pure scalar code,
no fastmath, so results are identical to the numpy fallback path).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

# Convergence: off-diagonal Frobenius norm below REL_TOL * ||A||_F.
REL_TOL = 1e-12
MAX_SWEEPS = 100


@dataclass(frozen=True)
class SymEigResult:
    """Full spectrum of a symmetric matrix.

    eigenvalues are sorted non-increasing; column j of eigenvectors pairs
    with eigenvalues[j].
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _jacobi_sweeps(S, V, skip, tol, max_sweeps):
    """Run cyclic Jacobi sweeps in place; return sweeps used or -1."""
    n = S.shape[0]
    for sweep in range(max_sweeps):
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for i in range(n):
                    sip = S[i, p]
                    siq = S[i, q]
                    S[i, p] = c * sip - s * siq
                    S[i, q] = s * sip + c * siq
                for i in range(n):
                    spi = S[p, i]
                    sqi = S[q, i]
                    S[p, i] = c * spi - s * sqi
                    S[q, i] = s * spi + c * sqi
                S[p, q] = 0.0
                S[q, p] = 0.0
                for i in range(n):
                    vip = V[i, p]
                    viq = V[i, q]
                    V[i, p] = c * vip - s * viq
                    V[i, q] = s * vip + c * viq
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += S[p, q] * S[p, q]
        if np.sqrt(2.0 * off) < tol:
            return sweep + 1
    return -1


try:
    from numba import njit

    _jacobi_sweeps = njit("i8(f8[:,::1], f8[:,::1], f8, f8, i8)", cache=True)(_jacobi_sweeps)
except ImportError:  # pragma: no cover - numba is an optional accelerator
    pass


def fix_eigenvector_signs(V):
    """Flip column signs so each column's largest-magnitude entry is >= 0.

    Ties in magnitude are broken by the lowest row index (np.argmax order).
    Returns V itself, modified in place.
    """
    idx = np.argmax(np.abs(V), axis=0)
    flip = V[idx, np.arange(V.shape[1])] < 0.0
    V[:, flip] *= -1.0
    return V


def sym_eig(A):
    """Eigendecompose a symmetric real matrix with the cyclic Jacobi method.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric within 1e-10 relative asymmetry, all entries finite.

    Returns
    -------
    SymEigResult
        Eigenvalues sorted descending, orthonormal eigenvector columns with
        a deterministic sign convention.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    scale = np.max(np.abs(A))
    asym = np.max(np.abs(A - A.T))
    if asym > 1e-10 * max(scale, 1.0):
        raise ValueError(
            f"matrix is not symmetric (max asymmetry {asym:.3e} for scale {scale:.3e})"
        )

    n = A.shape[0]
    if n == 1:
        return SymEigResult(A[0].copy(), np.ones((1, 1)))

    S = np.ascontiguousarray(0.5 * (A + A.T))
    V = np.eye(n)
    norm = np.sqrt(np.sum(S * S))
    if norm == 0.0:
        return SymEigResult(np.zeros(n), V)

    tol = REL_TOL * norm
    # Skipping rotations below tol/n still guarantees the off-diagonal
    # Frobenius norm ends below tol: sqrt(2 * n(n-1)/2 * (tol/n)^2) <= tol.
    sweeps = _jacobi_sweeps(S, V, tol / n, tol, MAX_SWEEPS)
    if sweeps < 0:
        raise NumericalError(
            f"Jacobi sweep cap ({MAX_SWEEPS}) reached before convergence"
        )

    values = np.diag(S).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    V = V[:, order]
    fix_eigenvector_signs(V)
    return SymEigResult(values, V)
