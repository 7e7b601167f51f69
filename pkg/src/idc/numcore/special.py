"""Gaussian error function.

|x| < 3 uses the everywhere-positive Maclaurin-type series (Abramowitz &
Stegun 7.1.6); larger |x| use the erfc continued fraction (A&S 7.1.14),
evaluated bottom-up at a fixed depth. Absolute error is below 1e-15 on the
real line.
"""

from __future__ import annotations

import math

import numpy as np

_SERIES_LIMIT = 3.0
_CF_DEPTH = 90
_INV_SQRT_PI = 1.0 / math.sqrt(math.pi)


def _erf_series(x):
    x2 = x * x
    term = x.copy()
    total = x.copy()
    for n in range(1, 200):
        term = term * (2.0 * x2) / (2 * n + 1)
        total += term
        if np.all(term <= 1e-17 * total):
            break
    return 2.0 * _INV_SQRT_PI * np.exp(-x2) * total


def _erfc_cf(x):
    k = np.array(x, copy=True)
    for n in range(_CF_DEPTH, 0, -1):
        k = x + (0.5 * n) / k
    return np.exp(-x * x) * _INV_SQRT_PI / k


def erf(x):
    """Elementwise erf for scalars or arrays (returns the same kind)."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("erf() needs finite input")
    a = np.abs(x).ravel()
    out = np.empty_like(a)
    small = a < _SERIES_LIMIT
    if small.any():
        out[small] = _erf_series(a[small])
    big = ~small
    if big.any():
        out[big] = 1.0 - _erfc_cf(a[big])
    out = np.copysign(out, x.ravel()).reshape(x.shape)
    return float(out) if scalar else out


def normal_cdf(x):
    return 0.5 * (1.0 + erf(np.asarray(x, dtype=np.float64) / math.sqrt(2.0)))
