"""Interpretable deep clustering for tabular data.

Stage 1 learns sparse per-sample feature gates together with a denoising
autoencoder; stage 2 fits a clustering head on the frozen embeddings and
cluster-level gates through an auxiliary classifier.
"""

from idc.data import Dataset, SyntheticSpec, load_csv, make_synthetic
from idc.errors import ConfigError, DataError, IdcError, NumericalError
from idc.pipeline import IdcModel, TrainConfig, predict, synthetic_config, train

__all__ = [
    "ConfigError",
    "DataError",
    "Dataset",
    "IdcError",
    "IdcModel",
    "NumericalError",
    "SyntheticSpec",
    "TrainConfig",
    "load_csv",
    "make_synthetic",
    "predict",
    "synthetic_config",
    "train",
]
