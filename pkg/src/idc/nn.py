"""Fully-connected networks stored as flat ``name -> ndarray`` dictionaries.

A network with prefix ``enc`` and widths ``[13, 32, 8]`` owns ``enc.W0``
(13x32), ``enc.b0`` (1x32), ``enc.W1`` and ``enc.b1``. Hidden layers use a
leaky rectifier; the output layer is linear.
"""

from __future__ import annotations

import numpy as np

from idc.numcore import ops
from idc.numcore.rng import Rng

LEAKY_SLOPE = 0.01


def init_mlp(prefix: str, widths: list[int], rng: Rng, out_scale: float = 1.0) -> dict:
    params = {}
    n = len(widths) - 1
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform((fan_in, fan_out), -bound, bound)
        b = rng.uniform((1, fan_out), -bound, bound)
        if i == n - 1:
            W *= out_scale
            b *= out_scale
        params[f"{prefix}.W{i}"] = W
        params[f"{prefix}.b{i}"] = b
    return params


def n_layers(params: dict, prefix: str) -> int:
    n = 0
    while f"{prefix}.W{n}" in params:
        n += 1
    return n


def mlp(params: dict, prefix: str, x):
    """Forward pass; ``params`` and ``x`` may be tape Vars or plain arrays."""
    n = n_layers(params, prefix)
    if n == 0:
        raise KeyError(f"no layers with prefix {prefix!r}")
    h = x
    for i in range(n):
        W = params[f"{prefix}.W{i}"]
        if np.shape(h)[-1] != np.shape(W)[0]:
            raise ValueError(f"{prefix}: input has {np.shape(h)[-1]} columns, "
                             f"layer {i} expects {np.shape(W)[0]}")
        h = ops.matmul(h, W) + params[f"{prefix}.b{i}"]
        if i < n - 1:
            h = ops.leaky_relu(h, LEAKY_SLOPE)
    return h

