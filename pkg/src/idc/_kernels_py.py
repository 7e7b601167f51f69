"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Every function here has the same signature and results (up to roundoff) as
its compiled twin; the test-suite runs both against each other.
"""

from __future__ import annotations

import numpy as np

from idc.errors import NotPositiveDefinite


def cholesky(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = a[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0.0:
            raise NotPositiveDefinite(j)
        L[j, j] = np.sqrt(s)
        L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def lower_inverse(L: np.ndarray) -> np.ndarray:
    n = L.shape[0]
    Y = np.zeros((n, n))
    for j in range(n):
        Y[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            Y[i, j] = -(L[i, j:i] @ Y[j:i, j]) / L[i, i]
    return Y


def logdet_from_factor(L: np.ndarray) -> float:
    return float(2.0 * np.sum(np.log(np.diag(L))))


def nudft(x: np.ndarray, y: np.ndarray, scale: float, n_freq: int,
          chunk: int = 256) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros(n_freq, dtype=np.complex128)
    m = np.arange(n_freq, dtype=np.float64)
    for start in range(0, x.shape[0], chunk):
        xs = x[start:start + chunk]
        phase = np.exp(-2j * np.pi * scale * np.outer(xs, m))
        out += y[start:start + chunk] @ phase
    return out / x.shape[0]


def neighbor_ratios(X: np.ndarray, Z: np.ndarray, nbrs: np.ndarray) -> np.ndarray:
    dx = np.linalg.norm(X[:, None, :] - X[nbrs], axis=2)
    dz = np.linalg.norm(Z[:, None, :] - Z[nbrs], axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(dx == 0.0, np.nan, dz / np.where(dx == 0.0, 1.0, dx))


def knn(X: np.ndarray, r: int) -> np.ndarray:
    N, D = X.shape
    out = np.empty((N, r), dtype=np.int64)
    chunk = max(1, int(2e7 // max(1, N * D)))
    for start in range(0, N, chunk):
        rows = slice(start, min(start + chunk, N))
        # exact differences rather than the |a|^2+|b|^2-2ab expansion: ties must match
        d = ((X[rows, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        idx = np.arange(rows.start, rows.stop)
        d[idx - start, idx] = np.inf
        out[rows] = np.argsort(d, axis=1, kind="stable")[:, :r]
    return out
