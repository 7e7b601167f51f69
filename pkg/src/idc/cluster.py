"""Clustering head, global gates with the auxiliary classifier, and K-means."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from idc import gates, nn
from idc.errors import NumericalError
from idc.numcore import ops
from idc.numcore.rng import Rng


@dataclass
class ClusterConfig:
    k: int = 4
    tau: float = 1.0
    eps_head: float = 0.1
    lambda_g_max: float = 1.0
    head_norm: str = "cluster"
    hidden: int = 64
    aux_hidden: int = 64

    def validate(self) -> list[str]:
        problems = []
        if self.k < 1:
            problems.append("cluster.k must be >= 1")
        if not self.tau > 0:
            problems.append("cluster.tau must be > 0")
        if not self.eps_head > 0:
            problems.append("cluster.eps_head must be > 0")
        if not self.lambda_g_max >= 0:
            problems.append("cluster.lambda_g_max must be >= 0")
        if self.head_norm not in HEAD_NORMS:
            problems.append(f"cluster.head_norm must be one of {HEAD_NORMS}")
        if self.hidden < 1 or self.aux_hidden < 1:
            problems.append("cluster hidden widths must be >= 1")
        return problems


def init_cluster_params(d: int, d_h: int, cfg: ClusterConfig, rng: Rng) -> dict:
    params = nn.init_mlp("head", [d_h, cfg.hidden, cfg.k], rng)
    params.update(nn.init_mlp("aux", [d, cfg.aux_hidden, cfg.k], rng))
    params["global.M"] = gates.init_global_gates(cfg.k, d)
    return params


def head_logits(params: dict, h_normalized):
    return nn.mlp(params, "head", h_normalized)


def gumbel_softmax(logits, tau: float, rng: Rng | None, mode: str = gates.TRAIN):
    """Relaxed one-hot samples; eval mode drops the Gumbel noise.

    The head's raw outputs are turned into log-probabilities first, so
    ``log(pi)`` is always defined.
    """
    logp = ops.log_softmax(logits, axis=1)
    if mode == gates.TRAIN:
        logp = ops.add(logp, rng.gumbel(np.shape(logits)))
    elif mode != gates.EVAL:
        raise ValueError(f"unknown mode {mode!r}")
    return ops.softmax(ops.mul(logp, 1.0 / tau), axis=1)


HEAD_NORMS = ("batch", "cluster")


def head_loss(H, soft, eps_head: float, norm: str = "batch"):
    """Per-cluster coding rate of the embeddings under soft assignments.

    ``norm="batch"``: ``sum_k 0.5 logdet(I + d_h/(N_B eps) H^T diag(s_k) H)``.
    ``norm="cluster"``: each term uses the cluster's soft size ``n_k`` in
    place of ``N_B`` and is weighted by ``n_k / N_B``, the compression term of
    rate reduction. The batch form never increases when clusters merge, so
    on its own it drifts towards a single cluster.
    """
    if norm not in HEAD_NORMS:
        raise ValueError(f"unknown head norm {norm!r}")
    n_b, d_h = np.shape(H)
    eye = np.eye(d_h)
    total = 0.0
    for k in range(np.shape(soft)[1]):
        s_k = ops.getitem(soft, (slice(None), slice(k, k + 1)))
        gram = ops.matmul(ops.transpose(H), ops.mul(H, s_k))
        if norm == "batch":
            term = 0.5 * ops.logdet_spd(ops.add(eye, ops.mul(gram, d_h / (n_b * eps_head))))
        else:
            n_k = ops.add(ops.vsum(s_k), 1e-12)
            scaled = ops.div(gram, ops.mul(n_k, eps_head / d_h))
            term = ops.mul(ops.logdet_spd(ops.add(eye, scaled)), ops.mul(n_k, 0.5 / n_b))
        total = ops.add(total, term)
    return total


def cross_entropy(logits, targets: np.ndarray):
    logp = ops.log_softmax(logits, axis=1)
    picked = ops.getitem(logp, (np.arange(len(targets)), targets))
    return -ops.mean(picked)


def clust_loss(x_gated: np.ndarray, h_normalized: np.ndarray, params: dict, cfg: ClusterConfig,
               lam_g: float, rng: Rng, sigma: float = 0.5):
    """Stage-2 objective on a batch of frozen stage-1 outputs.

    ``x_gated`` is ``x * z`` and ``h_normalized`` the unit-norm embeddings;
    both are constants here, so only the head, the auxiliary classifier and
    the global gate logits receive gradient.
    """
    logits = head_logits(params, h_normalized)
    soft = gumbel_softmax(logits, cfg.tau, rng, gates.TRAIN)
    terms = {"head": head_loss(h_normalized, soft, cfg.eps_head, cfg.head_norm)}
    hard = np.argmax(ops.constant(soft), axis=1)
    z_g = gates.global_gate_forward(params["global.M"], hard, rng, gates.TRAIN, sigma)
    aux_logits = nn.mlp(params, "aux", ops.mul(z_g, x_gated))
    terms["ce"] = cross_entropy(aux_logits, hard)
    terms["reg_g"] = gates.reg_loss(params["global.M"], sigma)
    total = ops.add(ops.add(terms["head"], terms["ce"]), ops.mul(terms["reg_g"], lam_g))
    breakdown = {k: float(np.asarray(ops.constant(v))) for k, v in terms.items()}
    bad = [k for k, v in breakdown.items() if not np.isfinite(v)]
    if bad:
        raise NumericalError(f"non-finite stage-2 loss term(s): {', '.join(bad)}")
    breakdown["total"] = float(np.asarray(ops.constant(total)))
    return total, breakdown, ops.constant(soft)


def check_collapse(soft: np.ndarray) -> list[int]:
    """Clusters whose soft mass share is below 1/(10K); warns when non-empty."""
    k = soft.shape[1]
    share = soft.sum(axis=0) / soft.sum()
    small = [int(j) for j in np.flatnonzero(share < 1.0 / (10 * k))]
    if small and k > 1:
        warnings.warn(f"cluster(s) {small} hold less than 1/(10K) of the soft mass",
                      RuntimeWarning, stacklevel=2)
    return small


# --------------------------------------------------------------------------
# K-means


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def kmeans_plusplus(X: np.ndarray, k: int, rng: Rng) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(0, n)]
    closest = _sq_dists(X, centers[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point coincides with a chosen center
            idx = rng.integers(0, n)
        else:
            idx = rng.choice(n, p=closest / total)
        centers[j] = X[idx]
        closest = np.minimum(closest, _sq_dists(X, centers[j:j + 1]).ravel())
    return centers


def _lloyd(X, k, rng, max_iter, tol):
    n = X.shape[0]
    centers = kmeans_plusplus(X, k, rng)
    for _ in range(max_iter):
        d = _sq_dists(X, centers)
        labels = np.argmin(d, axis=1)
        new = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new[j] = X[members].mean(axis=0)
            else:
                far = int(np.argmax(d[np.arange(n), labels]))
                new[j] = X[far]
                labels[far] = j
        shift = np.sqrt(((new - centers) ** 2).sum(axis=1)).max()
        centers = new
        if shift < tol:
            break
    d = _sq_dists(X, centers)
    labels = np.argmin(d, axis=1)
    return labels, centers, float(d[np.arange(n), labels].sum())


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6, n_init: int = 10):
    """Lloyd iterations from k-means++ seeding, best of ``n_init`` starts.

    Returns ``(labels, centers, inertia)``. A cluster that empties is
    re-seeded at the point farthest from its current center.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    root = Rng(seed)
    best = None
    for i in range(n_init):
        run = _lloyd(X, k, root.spawn(i), max_iter, tol)
        if best is None or run[2] < best[2]:
            best = run
    return best
