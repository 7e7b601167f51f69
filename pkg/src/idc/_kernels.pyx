# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors :mod:`idc._kernels_py` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, M_PI, NAN

cnp.import_array()

from idc.errors import NotPositiveDefinite


def cholesky(const double[:, ::1] a):
    """Lower Cholesky factor of a symmetric positive-definite matrix."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] L = out
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            raise NotPositiveDefinite(j)
        L[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return out


def lower_inverse(const double[:, ::1] L):
    """Inverse of a lower-triangular matrix by forward substitution."""
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] Y = out
    for j in range(n):
        Y[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= L[i, k] * Y[k, j]
            Y[i, j] = s / L[i, i]
    return out


def logdet_from_factor(const double[:, ::1] L):
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(L.shape[0]):
        s += log(L[i, i])
    return 2.0 * s


def nudft(const double[::1] x, const double[::1] y, double scale, Py_ssize_t n_freq):
    """out[m] = (1/N) sum_n y_n exp(-2 pi i m scale x_n), m = 0..n_freq-1.

    Each sample's phasor is advanced by repeated complex multiplication; the
    recurrence is re-seeded from sin/cos every 64 steps to bound drift.
    """
    cdef Py_ssize_t N = x.shape[0]
    cdef Py_ssize_t n, m
    cdef double re, im, step_re, step_im, theta, tmp, w
    re_out = np.zeros(n_freq, dtype=np.float64)
    im_out = np.zeros(n_freq, dtype=np.float64)
    cdef double[::1] R = re_out
    cdef double[::1] I = im_out
    for n in range(N):
        w = y[n]
        if w == 0.0:
            continue
        theta = -2.0 * M_PI * scale * x[n]
        step_re = cos(theta)
        step_im = sin(theta)
        re = 1.0
        im = 0.0
        for m in range(n_freq):
            if m % 64 == 0:
                re = cos(theta * m)
                im = sin(theta * m)
            R[m] += w * re
            I[m] += w * im
            tmp = re * step_re - im * step_im
            im = re * step_im + im * step_re
            re = tmp
    out = (re_out + 1j * im_out) / N
    return out


def neighbor_ratios(const double[:, ::1] X, const double[:, ::1] Z, const long[:, ::1] nbrs):
    """Per-pair ||z_i - z_l|| / ||x_i - x_l||; NaN where the x-distance is zero."""
    cdef Py_ssize_t N = X.shape[0]
    cdef Py_ssize_t D = X.shape[1]
    cdef Py_ssize_t r = nbrs.shape[1]
    cdef Py_ssize_t i, j, d, l
    cdef double dx, dz, t
    out = np.empty((N, r), dtype=np.float64)
    cdef double[:, ::1] O = out
    for i in range(N):
        for j in range(r):
            l = nbrs[i, j]
            dx = 0.0
            dz = 0.0
            for d in range(D):
                t = X[i, d] - X[l, d]
                dx += t * t
                t = Z[i, d] - Z[l, d]
                dz += t * t
            if dx == 0.0:
                O[i, j] = NAN
            else:
                O[i, j] = sqrt(dz) / sqrt(dx)
    return out


def knn(const double[:, ::1] X, Py_ssize_t r):
    """Indices of the r nearest neighbours (Euclidean, self excluded), ties by index."""
    cdef Py_ssize_t N = X.shape[0]
    cdef Py_ssize_t D = X.shape[1]
    cdef Py_ssize_t i, l, d, j, p
    cdef double t, s
    out = np.empty((N, r), dtype=np.int64)
    cdef long[:, ::1] O = out
    best_d = np.empty(r, dtype=np.float64)
    cdef double[::1] bd = best_d
    best_i = np.empty(r, dtype=np.int64)
    cdef long[::1] bi = best_i
    cdef Py_ssize_t filled
    for i in range(N):
        filled = 0
        for l in range(N):
            if l == i:
                continue
            s = 0.0
            for d in range(D):
                t = X[i, d] - X[l, d]
                s += t * t
            if filled < r:
                p = filled
                filled += 1
            elif s < bd[r - 1]:
                p = r - 1
            else:
                continue
            # insertion keeps (distance, index) order; strict < keeps lower index first
            while p > 0 and s < bd[p - 1]:
                bd[p] = bd[p - 1]
                bi[p] = bi[p - 1]
                p -= 1
            bd[p] = s
            bi[p] = l
        for j in range(r):
            O[i, j] = bi[j]
    return out
