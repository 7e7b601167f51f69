"""Dataset loading, scaling, mini-batching and the synthetic gate benchmark."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from idc.errors import ConfigError, DataError
from idc.numcore.rng import Rng


@dataclass(frozen=True)
class Dataset:
    """N x D samples; ``labels`` are for evaluation only and never used in training.

    ``informative_mask`` (N x D, bool) marks per-sample ground-truth features
    when known (synthetic data).
    """

    X: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None
    informative_mask: np.ndarray | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise DataError(f"X must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise DataError(f"non-finite value at row {r}, column {c}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.labels is not None:
            y = np.asarray(self.labels)
            if y.shape != (X.shape[0],):
                raise DataError(f"labels must have length {X.shape[0]}, got {y.shape}")
            if not np.issubdtype(y.dtype, np.integer) or (y.size and y.min() < 0):
                raise DataError("labels must be non-negative integers")
            object.__setattr__(self, "labels", y.astype(np.int64))
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise DataError("feature_names length does not match the number of columns")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(
            self.X[idx],
            None if self.labels is None else self.labels[idx],
            self.feature_names,
            None if self.informative_mask is None else self.informative_mask[idx],
        )


def minmax_scale(X: np.ndarray) -> np.ndarray:
    """Per-column scaling to [0, 1]; constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    return out


def encode_labels(raw) -> np.ndarray:
    """Map arbitrary label values onto 0..K-1 (sorted order)."""
    raw = np.asarray(raw)
    try:
        numeric = raw.astype(np.float64)
    except ValueError:
        _, codes = np.unique(raw, return_inverse=True)
        return codes.astype(np.int64)
    if np.all(numeric == np.round(numeric)):
        numeric = numeric.astype(np.int64)
    _, codes = np.unique(numeric, return_inverse=True)
    return codes.astype(np.int64)


def _parse_cell(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(f"cannot parse {text!r} as a number at row {row}, column {col}") from None
    if not np.isfinite(value):
        raise DataError(f"non-finite value {text!r} at row {row}, column {col}")
    return value


def load_csv(path, has_header: bool = True, label_column: str | int | None = None,
             scale: bool = True) -> Dataset:
    """Read a numeric CSV. Rows and columns in errors are 0-based data coordinates.

    ``label_column`` (a header name, or an index) is split off into
    ``labels``; the remaining columns are min-max scaled unless ``scale`` is
    false.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if has_header:
        if not rows:
            raise DataError(f"{path} is empty")
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    else:
        header = None
    if not rows:
        raise DataError(f"{path} has no data rows")
    width = len(header) if header is not None else len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DataError(f"ragged row {i}: expected {width} fields, found {len(r)}")

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
            if header is None or label_column not in header:
                raise DataError(f"label column {label_column!r} not found")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column) % width
    keep = [j for j in range(width) if j != label_idx]
    X = np.empty((len(rows), len(keep)))
    for i, r in enumerate(rows):
        for k, j in enumerate(keep):
            X[i, k] = _parse_cell(r[j].strip(), i, j)
    labels = None
    if label_idx is not None:
        labels = encode_labels([r[label_idx].strip() for r in rows])
    names = [header[j] for j in keep] if header is not None else None
    return Dataset(minmax_scale(X) if scale else X, labels, names)


def save_csv(ds: Dataset, path, with_labels: bool = False) -> None:
    path = Path(path)
    names = ds.feature_names or [f"x{j}" for j in range(ds.d)]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + (["label"] if with_labels else []))
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.X[i]]
            if with_labels:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def load_labels(path) -> np.ndarray:
    """Single-column label file (header optional)."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        cells = [r[0].strip() for r in csv.reader(fh) if r]
    if cells and not cells[0].lstrip("-").replace(".", "", 1).isdigit():
        cells = cells[1:]
    if not cells:
        raise DataError(f"{path} holds no labels")
    return encode_labels(cells)


# --------------------------------------------------------------------------
# synthetic benchmark

# Signs of the informative coordinates per cluster. Projected onto features
# (0, 1) clusters 2 and 3 coincide; onto (0, 2) clusters 0 and 1 coincide.
CENTER_SIGNS = np.array([
    [-1.0, -1.0, +1.0],
    [-1.0, +1.0, +1.0],
    [+1.0, -1.0, -1.0],
    [+1.0, -1.0, +1.0],
])
# features that separate each cluster in its identifying 2-D projection
CLUSTER_FEATURES = ((0, 1), (0, 1), (0, 2), (0, 2))


@dataclass(frozen=True)
class SyntheticSpec:
    clusters: int = 4
    samples_per_cluster: int = 800
    informative_dims: int = 3
    background_dims: int = 10
    blob_std: float = 0.5
    center_scale: float = 3.0
    background_std: float = 0.1
    seed: int = 0

    def validate(self) -> None:
        problems = []
        if self.clusters != 4 or self.informative_dims != 3:
            problems.append("the gate benchmark layout needs clusters=4 and informative_dims=3")
        if self.samples_per_cluster < 1:
            problems.append("samples_per_cluster must be >= 1")
        if self.background_dims < 0:
            problems.append("background_dims must be >= 0")
        for name in ("blob_std", "center_scale", "background_std"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be > 0")
        if problems:
            raise ConfigError(problems)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError([f"unknown synthetic spec field {k!r}" for k in unknown])
        return cls(**d)


def make_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    """Four Gaussian blobs in three informative features plus Gaussian background.

    Blobs (std ``blob_std``) sit at ``center_scale * CENTER_SIGNS``; the three
    informative columns are then divided by their joint max-abs so they lie in
    [-1, 1]. Background columns are N(0, background_std^2) and are not rescaled.
    Samples are ordered cluster by cluster.
    """
    spec.validate()
    rng = Rng(spec.seed)
    K, n = spec.clusters, spec.samples_per_cluster
    labels = np.repeat(np.arange(K), n)
    centers = spec.center_scale * CENTER_SIGNS
    info = centers[labels] + rng.normal((K * n, spec.informative_dims), scale=spec.blob_std)
    info /= np.max(np.abs(info))
    background = rng.normal((K * n, spec.background_dims), scale=spec.background_std)
    X = np.hstack([info, background])
    mask = np.zeros(X.shape, dtype=bool)
    for k, feats in enumerate(CLUSTER_FEATURES):
        mask[np.ix_(labels == k, feats)] = True
    names = [f"info{j}" for j in range(spec.informative_dims)]
    names += [f"bg{j}" for j in range(spec.background_dims)]
    return Dataset(X, labels, names, mask)


def export_synthetic(ds: Dataset, spec: SyntheticSpec, out_dir) -> dict[str, Path]:
    """Write ``data.csv`` (features), ``labels.csv`` and ``mask.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"data": out / "data.csv", "labels": out / "labels.csv", "mask": out / "mask.json"}
    save_csv(ds, paths["data"])
    with paths["labels"].open("w", newline="", encoding="utf-8") as fh:
        fh.write("label\n")
        fh.writelines(f"{int(v)}\n" for v in ds.labels)
    sidecar = {
        "spec": spec.to_dict(),
        "labels": ds.labels.tolist(),
        "informative_features_per_cluster": [list(f) for f in CLUSTER_FEATURES],
        "informative_mask": ds.informative_mask.astype(int).tolist(),
    }
    paths["mask"].write_text(json.dumps(sidecar), encoding="utf-8")
    return paths


def load_mask(path) -> np.ndarray:
    return np.asarray(json.loads(Path(path).read_text())["informative_mask"], dtype=bool)


# --------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    drop_last: bool = False
    shuffle: bool = True

    def __post_init__(self):
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (coding-rate terms degenerate at 1)")


def batches(n: int, plan: BatchPlan, rng: Rng | None = None) -> list[np.ndarray]:
    """One epoch's index slices: a random partition of ``range(n)``.

    A trailing batch is kept unless ``drop_last`` is set, except that a
    single leftover sample is always dropped.
    """
    if hasattr(n, "n"):
        n = n.n
    if plan.batch_size > n:
        raise DataError(f"batch size {plan.batch_size} exceeds dataset size {n}")
    order = rng.permutation(n) if plan.shuffle and rng is not None else np.arange(n)
    out = [order[s:s + plan.batch_size] for s in range(0, n, plan.batch_size)]
    tail = len(out[-1])
    if tail < plan.batch_size and (plan.drop_last or tail < 2):
        out.pop()
    return out
