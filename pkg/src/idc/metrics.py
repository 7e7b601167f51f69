"""Clustering scores and interpretability metrics for local and global gates."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.optimize import linear_sum_assignment

from idc import kernels
from idc.errors import ConfigError, DataError
from idc.numcore.rng import Rng


def _check_pair(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise DataError(f"label length mismatch: {pred.size} vs {truth.size}")
    if pred.size == 0:
        raise DataError("empty labelings")
    return pred, truth


def contingency(pred, truth) -> np.ndarray:
    """Counts table with rows indexed by predicted and columns by true labels."""
    pred, truth = _check_pair(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def clustering_accuracy(pred, truth) -> float:
    """Best matched fraction over one-to-one label maps (Hungarian assignment)."""
    table = contingency(pred, truth)
    rows, cols = linear_sum_assignment(-table)
    return float(table[rows, cols].sum() / table.sum())


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def ari(pred, truth) -> float:
    table = contingency(pred, truth)
    n = table.sum()
    sum_ij = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    denom = 0.5 * (sum_a + sum_b) - expected
    if table.shape[1] == 1 or denom == 0:
        warnings.warn("ARI undefined for a single-cluster labeling; reporting 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return float((sum_ij - expected) / denom)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the arithmetic mean of the two entropies."""
    table = contingency(pred, truth).astype(np.float64)
    n = table.sum()
    h_p, h_t = _entropy(table.sum(axis=1)), _entropy(table.sum(axis=0))
    if table.shape[1] == 1 or h_p + h_t == 0:
        warnings.warn("NMI undefined for a single-cluster labeling; reporting 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    pi, pj = table.sum(axis=1, keepdims=True) / n, table.sum(axis=0, keepdims=True) / n
    nz = table > 0
    pij = table / n
    mi = float((pij[nz] * np.log(pij[nz] / (pi @ pj)[nz])).sum())
    return max(0.0, mi / (0.5 * (h_p + h_t)))


# --------------------------------------------------------------------------
# interpretability


def top_k_sets(Z_G: np.ndarray, top_k: int) -> list[set[int]]:
    """Per row, the indices of the ``top_k`` largest open gates (ties to lower index)."""
    Z_G = np.asarray(Z_G, dtype=np.float64)
    out = []
    for row in Z_G:
        order = np.argsort(-row, kind="stable")[:top_k]
        out.append({int(j) for j in order if row[j] > 0})
    return out


def jaccard(a: set, b: set) -> float:
    union = a | b
    return 1.0 if not union else len(a & b) / len(union)


def diversity(sets) -> float:
    """One minus the mean Jaccard similarity over unordered pairs of sets."""
    sets = [set(s) for s in sets]
    k = len(sets)
    if k < 2:
        raise ValueError("diversity needs at least two feature sets")
    total = sum(jaccard(sets[i], sets[j]) for i in range(k) for j in range(i + 1, k))
    return 1.0 - total / (k * (k - 1) / 2)


def uniqueness(Z, X, r: int = 2, return_skipped: bool = False):
    """Mean over samples of the mean ``|z_i - z_l| / |x_i - x_l|`` across the
    ``r`` nearest neighbours ``l`` of ``x_i``.

    Neighbour pairs with coincident ``x`` are skipped; their number is
    returned as well when ``return_skipped`` is set.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if Z.shape[0] != X.shape[0]:
        raise DataError("Z and X must have the same number of rows")
    if not 1 <= r < X.shape[0]:
        raise ValueError(f"need 1 <= r < N, got r={r}, N={X.shape[0]}")
    nbrs = kernels.knn(X, r)
    ratios = kernels.neighbor_ratios(X, Z, nbrs)
    valid = np.isfinite(ratios)
    skipped = int((~valid).sum())
    if not valid.any():
        raise DataError("every neighbour pair is a duplicate point")
    counts = valid.sum(axis=1)
    per_sample = np.where(valid, ratios, 0.0).sum(axis=1)
    keep = counts > 0
    value = float(np.mean(per_sample[keep] / counts[keep]))
    return (value, skipped) if return_skipped else value


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a, b = a - a.mean(), b - b.mean()
    denom = math.sqrt(float((a * a).sum() * (b * b).sum()))
    if denom == 0:
        warnings.warn("correlation undefined for a constant input; reporting 0",
                      RuntimeWarning, stacklevel=2)
        return 0.0
    return float(np.clip((a * b).sum() / denom, -1.0, 1.0))


@dataclass
class FaithfulnessResult:
    correlation: float
    order: list[int]
    removed: list[int]
    acc: list[float]
    drops: list[float]

    def write_curve(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["removed_count", "feature", "acc", "drop"])
            w.writerow([0, "", repr(self.acc[0]), ""])
            for i, f in enumerate(self.order):
                w.writerow([i + 1, f, repr(self.acc[i + 1]), repr(self.drops[i])])


def faithfulness(predict_fn: Callable[[np.ndarray], np.ndarray], X, truth, importance,
                 steps: int | None = None) -> FaithfulnessResult:
    """Correlation between feature importance and the accuracy lost on removing it.

    Features are zeroed one at a time in decreasing order of importance and
    never restored; each step's drop is the accuracy lost at that step. The
    result correlates the removed features' importances with those drops.
    """
    X = np.array(X, dtype=np.float64)
    importance = np.asarray(importance, dtype=np.float64).ravel()
    if importance.size != X.shape[1]:
        raise DataError("importance needs one value per column")
    steps = X.shape[1] if steps is None else min(int(steps), X.shape[1])
    if steps < 3:
        raise ValueError("faithfulness needs at least 3 removal steps")
    order = [int(j) for j in np.argsort(-importance, kind="stable")[:steps]]
    accs = [clustering_accuracy(predict_fn(X), truth)]
    for j in order:
        X[:, j] = 0.0
        accs.append(clustering_accuracy(predict_fn(X), truth))
    drops = [accs[i] - accs[i + 1] for i in range(steps)]
    corr = pearson(importance[order], drops)
    return FaithfulnessResult(corr, order, list(range(1, steps + 1)), accs, drops)


def _hinge_ovr(Xtr, ytr, classes, C, max_epochs, tol, rng):
    """L2-regularized hinge-loss linear classifiers, one per class, fit by
    dual coordinate descent. Returns an (D+1) x K weight matrix (bias last)."""
    Xb = np.hstack([Xtr, np.ones((Xtr.shape[0], 1))])
    qdiag = (Xb * Xb).sum(axis=1)
    W = np.zeros((Xb.shape[1], len(classes)))
    for c_idx, c in enumerate(classes):
        y = np.where(ytr == c, 1.0, -1.0)
        alpha = np.zeros(len(y))
        w = np.zeros(Xb.shape[1])
        for _ in range(max_epochs):
            max_step = 0.0
            for i in rng.permutation(len(y)):
                if qdiag[i] == 0:
                    continue
                g = y[i] * (w @ Xb[i]) - 1.0
                new = min(max(alpha[i] - g / qdiag[i], 0.0), C)
                delta = new - alpha[i]
                if delta != 0.0:
                    w += delta * y[i] * Xb[i]
                    alpha[i] = new
                    max_step = max(max_step, abs(delta))
            if max_step < tol:
                break
        W[:, c_idx] = w
    return W


def generalizability(X, labels, features, split: float = 0.8, seed: int = 0, C: float = 1.0,
                     max_epochs: int = 200, tol: float = 1e-4) -> float:
    """Held-out accuracy of a linear max-margin classifier on the chosen columns."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    features = sorted({int(f) for f in features})
    if not features:
        raise ValueError("generalizability needs at least one feature")
    if not 0 < split < 1:
        raise ValueError("split must lie in (0, 1)")
    rng = Rng(seed).spawn(7)
    perm = rng.permutation(X.shape[0])
    n_tr = int(round(split * X.shape[0]))
    tr, te = perm[:n_tr], perm[n_tr:]
    if len(te) == 0 or len(tr) == 0:
        raise DataError("split leaves an empty train or test part")
    Xs = X[:, features]
    classes = np.unique(labels[tr])
    W = _hinge_ovr(Xs[tr], labels[tr], classes, C, max_epochs, tol, rng)
    scores = np.hstack([Xs[te], np.ones((len(te), 1))]) @ W
    return float(np.mean(classes[np.argmax(scores, axis=1)] == labels[te]))


def selection_f1(Z, mask) -> float:
    """Mean over samples of the F1 between open gates and the true feature set."""
    sel = np.asarray(Z) > 0
    mask = np.asarray(mask, dtype=bool)
    if sel.shape != mask.shape:
        raise DataError("gates and mask shapes differ")
    tp = (sel & mask).sum(axis=1)
    denom = sel.sum(axis=1) + mask.sum(axis=1)
    f1 = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1), 1.0)
    return float(f1.mean())


# --------------------------------------------------------------------------
# report


@dataclass
class MetricConfig:
    r: int = 2
    top_k: int = 15
    faithfulness_steps: int | None = None
    split: float = 0.8
    seed: int = 0

    def validate(self, d: int | None = None) -> None:
        problems = []
        if self.r < 1:
            problems.append("r must be >= 1")
        if self.top_k < 1:
            problems.append("top_k must be >= 1")
        if d is not None and self.top_k > d:
            problems.append(f"top_k ({self.top_k}) exceeds the number of features ({d})")
        if not 0 < self.split < 1:
            problems.append("split must lie in (0, 1)")
        if problems:
            raise ConfigError(problems)


@dataclass
class InterpretabilityReport:
    acc: float
    ari: float
    nmi: float
    open_gates: float
    uniqueness: float
    diversity: float
    faithfulness: float
    generalizability: float
    top_k: int = 15
    r: int = 2
    skipped_pairs: int = 0
    f1: float | None = None

    COLUMNS = ("acc", "ari", "nmi", "open_gates", "uniqueness", "diversity", "faithfulness",
               "generalizability")

    def to_dict(self) -> dict:
        return asdict(self)

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def save_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            w.writerow([repr(float(getattr(self, c))) for c in self.COLUMNS])

    @classmethod
    def from_dict(cls, d: dict) -> "InterpretabilityReport":
        known = {f.name for f in fields(cls)}
        missing = [c for c in cls.COLUMNS if c not in d]
        unknown = sorted(set(d) - known)
        if missing or unknown:
            raise DataError(f"bad report: missing {missing}, unknown {unknown}")
        return cls(**d)


def evaluate(model, X, labels, cfg: MetricConfig = MetricConfig(), mask=None):
    """Every clustering and interpretability score for a trained model.

    Returns ``(report, faithfulness_result)``. Importance is the mean
    eval-mode local gate per feature; the generalizability features are the
    ``top_k`` most important ones. ``top_k`` is capped at the column count.
    """
    from idc import pipeline

    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    top_k = min(cfg.top_k, X.shape[1])
    cfg = MetricConfig(cfg.r, top_k, cfg.faithfulness_steps, cfg.split, cfg.seed)
    cfg.validate(X.shape[1])
    out = pipeline.predict(model, X)
    z = out["gates"]
    importance = z.mean(axis=0)
    faith = faithfulness(lambda A: pipeline.predict(model, A)["labels"], X, labels, importance,
                         cfg.faithfulness_steps)
    uniq, skipped = uniqueness(z, X, cfg.r, return_skipped=True)
    sets = top_k_sets(out["global_gates"], top_k)
    div = diversity(sets) if len(sets) >= 2 else 0.0
    feats = np.argsort(-importance, kind="stable")[:top_k]
    report = InterpretabilityReport(
        acc=clustering_accuracy(out["labels"], labels),
        ari=ari(out["labels"], labels),
        nmi=nmi(out["labels"], labels),
        open_gates=float((z > 0).sum(axis=1).mean()),
        uniqueness=uniq,
        diversity=100.0 * div,
        faithfulness=faith.correlation,
        generalizability=generalizability(X, labels, feats, cfg.split, cfg.seed),
        top_k=top_k,
        r=cfg.r,
        skipped_pairs=skipped,
        f1=None if mask is None else selection_f1(z, mask),
    )
    return report, faith
