"""Finite-difference verification of tape gradients."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from idc.errors import NumericalError
from idc.numcore.tape import Tape, Var


def tape_gradient(loss: Callable[..., Var], params: Mapping[str, np.ndarray]):
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    out = loss(**leaves)
    grads = tape.backward(out)
    return float(out.value), {k: grads[v] for k, v in leaves.items()}


def _evaluate(loss, params) -> float:
    tape = Tape()
    out = loss(**{k: tape.leaf(v) for k, v in params.items()})
    value = float(np.asarray(out.value if isinstance(out, Var) else out))
    if not np.isfinite(value):
        raise NumericalError("loss is not finite at a finite-difference probe point")
    return value


def grad_check(loss, point, h: float = 1e-5) -> float:
    """Max over coordinates of ``|g_ad - g_fd| / max(1, |g_fd|)``.

    ``loss`` receives tape variables as keyword arguments named like the keys
    of ``point`` (a single array is passed as ``x``) and returns a scalar Var.
    """
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("step h must lie in [1e-6, 1e-3]")
    if isinstance(point, np.ndarray):
        point = {"x": point}
    params = {k: np.array(v, dtype=np.float64) for k, v in point.items()}
    _, g_ad = tape_gradient(loss, params)
    worst = 0.0
    for name, arr in params.items():
        flat = arr.reshape(-1)
        for j in range(flat.size):
            old = flat[j]
            flat[j] = old + h
            up = _evaluate(loss, params)
            flat[j] = old - h
            down = _evaluate(loss, params)
            flat[j] = old
            g_fd = (up - down) / (2 * h)
            err = abs(g_ad[name].reshape(-1)[j] - g_fd) / max(1.0, abs(g_fd))
            worst = max(worst, err)
    return worst
