"""Stochastic feature gates: local (per sample) and global (per cluster).

A gate is ``z = clamp(0.5 + mu + eps, 0, 1)`` with ``eps ~ N(0, sigma^2)`` in
training and ``eps = 0`` at evaluation. Gradients pass straight through the
clamp inside (0, 1) and are zero where it saturates.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from idc import nn
from idc.errors import ConfigError
from idc.numcore import ops
from idc.numcore.rng import Rng

TRAIN, EVAL = "train", "eval"


@dataclass
class GateConfig:
    sigma: float = 0.5
    lambda_max: float = 1.0
    eps_gtcr: float = 1.0
    hidden: int = 64

    def validate(self) -> list[str]:
        problems = []
        if not self.sigma > 0:
            problems.append("sigma must be > 0")
        if not self.lambda_max >= 0:
            problems.append("lambda_max must be >= 0")
        if not self.eps_gtcr > 0:
            problems.append("eps_gtcr must be > 0")
        if self.hidden < 1:
            problems.append("gate hidden width must be >= 1")
        return problems


def init_gating_network(d: int, hidden: int, rng: Rng) -> dict:
    # small output layer so the first gates sit near mu = 0
    return nn.init_mlp("gate", [d, hidden, d], rng, out_scale=0.1)


def gate_logits(params: dict, x):
    return nn.mlp(params, "gate", x)


def gate_forward(mu, rng: Rng | None, mode: str = TRAIN, sigma: float = 0.5):
    if mode == TRAIN:
        if rng is None:
            raise ValueError("train-mode gates need an rng")
        noise = rng.normal(np.shape(mu), scale=sigma)
        return ops.clamp_st(ops.add(mu, 0.5 + noise))
    if mode == EVAL:
        return ops.clamp_st(ops.add(mu, 0.5))
    raise ValueError(f"unknown gate mode {mode!r}")


def reg_loss(mu, sigma: float = 0.5):
    """Expected number of open gates per row, averaged over rows."""
    if not sigma > 0:
        raise ConfigError("sigma must be > 0")
    per_gate = 0.5 - 0.5 * ops.erf(ops.mul(ops.add(mu, 0.5), -1.0 / (math.sqrt(2.0) * sigma)))
    n_rows = np.shape(mu)[0]
    return ops.vsum(per_gate) * (1.0 / n_rows)


def gtcr_loss(Z, eps_gtcr: float = 1.0):
    """Negative coding rate of the L2-normalized gate rows (all-zero rows stay zero)."""
    n_b, d = np.shape(Z)
    Zn = ops.l2_normalize_rows(Z)
    gram = ops.matmul(ops.transpose(Zn), Zn)
    return -0.5 * ops.logdet_spd(np.eye(d) + (d / (n_b * eps_gtcr)) * gram)


def init_global_gates(k: int, d: int) -> np.ndarray:
    return np.zeros((k, d))


def global_gate_forward(M_G, k, rng: Rng | None, mode: str = TRAIN, sigma: float = 0.5):
    """Gate row(s) for cluster index ``k`` (an int or an integer array)."""
    n_clusters = np.shape(M_G)[0]
    idx = np.asarray(k)
    if np.any(idx < 0) or np.any(idx >= n_clusters):
        raise IndexError(f"cluster index out of range [0, {n_clusters - 1}]")
    rows = ops.getitem(M_G, int(idx) if idx.ndim == 0 else idx)
    if idx.ndim == 0:
        rows = ops.getitem(rows, (None, slice(None)))
    return gate_forward(rows, rng, mode, sigma)


def open_gate_count(z, threshold: float = 0.0) -> np.ndarray:
    """Open gates per row (entries strictly above ``threshold``)."""
    z = np.atleast_2d(np.asarray(z))
    return (z > threshold).sum(axis=1)


def mean_open_gates(z, threshold: float = 0.0) -> float:
    return float(open_gate_count(z, threshold).mean())


def write_gates_csv(z: np.ndarray, path, feature_names: list[str] | None = None) -> None:
    names = feature_names or [f"x{j}" for j in range(z.shape[1])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows([[repr(float(v)) for v in row] for row in z])


def top_k_features(z: np.ndarray, k: int) -> list[list[int]]:
    """Indices of the k largest gates per row; ties go to the lower index."""
    order = np.argsort(-np.asarray(z), axis=1, kind="stable")
    return order[:, :k].tolist()


def write_topk_json(z: np.ndarray, path, k: int, feature_names: list[str] | None = None) -> None:
    names = feature_names or [f"x{j}" for j in range(z.shape[1])]
    records = []
    for i, idx in enumerate(top_k_features(z, k)):
        records.append({"sample": i,
                        "features": [{"index": j, "name": names[j], "gate": float(z[i, j])}
                                     for j in idx if z[i, j] > 0]})
    Path(path).write_text(json.dumps(records, indent=1), encoding="utf-8")
