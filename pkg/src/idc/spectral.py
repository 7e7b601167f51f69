"""Frequency content of a trained model's predictions along each input feature.

For every feature the hard predictions are binarized (modal class against the
rest) and transformed with a direct non-uniform DFT against that feature's
raw values. Frequency index ``m = 0..nk`` corresponds to the frequency
``m * kmax / nk``, so the grid spans ``[0, kmax]`` in ``nk`` equal steps.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from idc import kernels
from idc.errors import ConfigError, DataError


@dataclass(frozen=True)
class SpectrumConfig:
    kmax: float = 20.0
    nk: int = 1000

    def validate(self) -> None:
        problems = []
        if not self.kmax > 0:
            problems.append("kmax must be > 0")
        if self.nk < 1:
            problems.append("nk must be >= 1")
        if problems:
            raise ConfigError(problems)

    @property
    def scale(self) -> float:
        return self.kmax / self.nk

    def frequencies(self) -> np.ndarray:
        return np.arange(self.nk + 1) * self.scale

    def plot_grid(self) -> np.ndarray:
        """The labelling grid ``linspace(0.1, kmax, nk + 1)`` used for plots."""
        return np.linspace(0.1, self.kmax, self.nk + 1)


def nudft(x, y, cfg: SpectrumConfig = SpectrumConfig()) -> np.ndarray:
    """``(1/N) sum_n y_n exp(-2 pi i m scale x_n)`` for ``m = 0..nk``."""
    cfg.validate()
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if x.size == 0:
        raise DataError("nudft needs at least one sample")
    if x.shape != y.shape:
        raise DataError("x and y must have the same length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DataError("nudft inputs must be finite")
    return kernels.nudft(x, y, cfg.scale, cfg.nk + 1)


def binarize_modal(labels) -> np.ndarray:
    """1.0 where the label equals the most frequent label, else 0.0.

    Ties go to the tied label that occurs first in sample order, so the
    result depends only on the partition and not on how labels are named.
    """
    labels = np.asarray(labels)
    values, first, counts = np.unique(labels, return_index=True, return_counts=True)
    tied = np.flatnonzero(counts == counts.max())
    modal = values[tied[np.argmin(first[tied])]]
    return (labels == modal).astype(np.float64)


@dataclass
class SpectrumResult:
    frequencies: np.ndarray
    amplitudes: np.ndarray  # (D, nk + 1)
    feature_names: list[str]

    def top_decile_median(self) -> float:
        """Median amplitude over the highest tenth of the frequency grid, all features."""
        n = self.amplitudes.shape[1]
        start = n - max(1, n // 10)
        return float(np.median(self.amplitudes[:, start:]))

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", *self.feature_names])
            for i, k in enumerate(self.frequencies):
                w.writerow([repr(float(k)), *(repr(float(a)) for a in self.amplitudes[:, i])])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("IDC_THREADS", "1")))
    except ValueError:
        return 1


def spectrum(X, labels, cfg: SpectrumConfig = SpectrumConfig(),
             feature_names: list[str] | None = None) -> SpectrumResult:
    """|NUDFT| of the binarized ``labels`` against every column of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    y = binarize_modal(labels)
    names = feature_names or [f"x{j}" for j in range(X.shape[1])]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(lambda j: np.abs(nudft(X[:, j], y, cfg)), range(X.shape[1])))
    return SpectrumResult(cfg.frequencies(), np.vstack(rows), list(names))


def model_spectrum(model, X, cfg: SpectrumConfig = SpectrumConfig()) -> SpectrumResult:
    from idc import pipeline

    if getattr(model, "stage", 0) < 2:
        raise ValueError("model is not trained (stage 2 missing)")
    labels = pipeline.predict(model, X)["labels"]
    return spectrum(X, labels, cfg, model.feature_names)
