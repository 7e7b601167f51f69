"""CSV loading, scaling, batching and the synthetic benchmark."""

from __future__ import annotations

import json

import numpy as np
import pytest

from idc import data
from idc.errors import ConfigError, DataError
from idc.numcore import Rng


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_scales_columns(tmp_path):
    p = write(tmp_path / "a.csv", "u,v\n1,5\n3,5\n2,5\n")
    ds = data.load_csv(p)
    assert ds.feature_names == ["u", "v"]
    assert ds.X[:, 0].tolist() == [0.0, 1.0, 0.5]
    assert ds.X[:, 1].tolist() == [0.0, 0.0, 0.0]  # constant column


def test_load_csv_label_column(tmp_path):
    p = write(tmp_path / "a.csv", "u,cls,v\n1,b,2\n2,a,3\n3,b,4\n")
    ds = data.load_csv(p, label_column="cls", scale=False)
    assert ds.labels.tolist() == [1, 0, 1]
    assert ds.X.tolist() == [[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]]


@pytest.mark.parametrize("text,needle", [
    ("a,b\n1,x\n", "row 0, column 1"),
    ("a,b\n1,2\n3,nan\n", "row 1, column 1"),
    ("a,b\n1,2\n3\n", "ragged row 1"),
    ("a,b\n", "no data rows"),
])
def test_load_csv_errors(tmp_path, text, needle):
    with pytest.raises(DataError, match=needle):
        data.load_csv(write(tmp_path / "bad.csv", text))


def test_missing_file(tmp_path):
    with pytest.raises(DataError):
        data.load_csv(tmp_path / "nope.csv")


def test_dataset_is_read_only():
    ds = data.Dataset(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0


def test_dataset_rejects_bad_labels():
    with pytest.raises(DataError):
        data.Dataset(np.zeros((2, 2)), labels=np.array([0, -1]))
    with pytest.raises(DataError):
        data.Dataset(np.zeros((2, 2)), labels=np.array([0]))


def test_encode_labels():
    assert data.encode_labels(["3", "1", "3"]).tolist() == [1, 0, 1]
    assert data.encode_labels(["cat", "ant"]).tolist() == [1, 0]


def test_synthetic_layout():
    ds = data.make_synthetic()
    assert ds.X.shape == (3200, 13)
    assert np.bincount(ds.labels).tolist() == [800] * 4
    assert np.abs(ds.X[:, :3]).max() == pytest.approx(1.0)
    assert ds.informative_mask.sum(axis=1).tolist() == [2] * 3200
    assert ds.informative_mask[:, 3:].sum() == 0
    # every cluster is identified by its own pair of features
    for k, feats in enumerate(data.CLUSTER_FEATURES):
        assert ds.informative_mask[ds.labels == k][:, list(feats)].all()


def test_synthetic_projection_ambiguity():
    """In (0, 1) clusters 2 and 3 coincide; in (0, 2) clusters 0 and 1 coincide."""
    c = data.CENTER_SIGNS
    assert np.array_equal(c[2, :2], c[3, :2]) and np.array_equal(c[0, [0, 2]], c[1, [0, 2]])


def test_synthetic_reproducible():
    a, b = data.make_synthetic(), data.make_synthetic()
    assert np.array_equal(a.X, b.X)
    c = data.make_synthetic(data.SyntheticSpec(seed=1))
    assert not np.array_equal(a.X, c.X)


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        data.make_synthetic(data.SyntheticSpec(clusters=3))
    with pytest.raises(ConfigError):
        data.SyntheticSpec.from_dict({"bogus": 1})


def test_export_round_trip(tmp_path):
    spec = data.SyntheticSpec(samples_per_cluster=5, background_dims=2)
    ds = data.make_synthetic(spec)
    paths = data.export_synthetic(ds, spec, tmp_path)
    back = data.load_csv(paths["data"], scale=False)
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(data.load_labels(paths["labels"]), ds.labels)
    assert np.array_equal(data.load_mask(paths["mask"]), ds.informative_mask)
    assert json.loads(paths["mask"].read_text())["spec"] == spec.to_dict()


def test_batches_partition():
    parts = data.batches(10, data.BatchPlan(4), Rng(0))
    assert [len(p) for p in parts] == [4, 4, 2]
    assert sorted(np.concatenate(parts).tolist()) == list(range(10))


def test_batches_drop_single_leftover():
    assert [len(p) for p in data.batches(9, data.BatchPlan(4), Rng(0))] == [4, 4]
    assert [len(p) for p in data.batches(10, data.BatchPlan(4, drop_last=True))] == [4, 4]


def test_batch_plan_errors():
    with pytest.raises(ConfigError):
        data.BatchPlan(1)
    with pytest.raises(DataError):
        data.batches(3, data.BatchPlan(4))
