"""Cholesky-based log-determinant for symmetric positive-definite matrices."""

from __future__ import annotations

import numpy as np

from idc import kernels
from idc.errors import NotPositiveDefinite

SYMMETRY_TOL = 1e-10


def _factor(a: np.ndarray, jitter: float) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite(int(np.argmax(~np.isfinite(np.diag(a)))))
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL * max(1.0, np.max(np.abs(a))):
        raise ValueError("matrix is not symmetric")
    try:
        return kernels.cholesky(a)
    except NotPositiveDefinite:
        if jitter <= 0:
            raise
    # one retry with a small diagonal shift, then give up
    return kernels.cholesky(a + jitter * np.eye(a.shape[0]))


def cholesky_logdet(a, jitter: float = 1e-9) -> float:
    """``log det(a)`` as ``2 * sum(log(diag(L)))`` with ``a = L L^T``.

    Raises :class:`~idc.errors.NotPositiveDefinite` naming the failing pivot
    when even ``a + jitter*I`` cannot be factored.
    """
    L = _factor(a, jitter)
    return float(kernels.logdet_from_factor(L))


def logdet_and_inverse(a, jitter: float = 1e-9) -> tuple[float, np.ndarray]:
    """Log-determinant and the (symmetrized) inverse, via triangular solves."""
    L = _factor(a, jitter)
    Linv = kernels.lower_inverse(L)
    inv = Linv.T @ Linv
    return float(kernels.logdet_from_factor(L)), 0.5 * (inv + inv.T)
