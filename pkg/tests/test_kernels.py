"""Both kernel backends against independent references and each other."""

from __future__ import annotations

import numpy as np
import pytest

from idc import kernels
from idc.errors import NotPositiveDefinite
from idc.kernels import get_backend

from conftest import BACKENDS, random_spd


def test_backend_selected_at_import():
    assert kernels.BACKEND in ("python", "compiled")


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_cholesky_reconstructs(backend, rng, n):
    A = random_spd(rng, n)
    L = backend.cholesky(A)
    assert np.allclose(np.triu(L, 1), 0.0)
    assert np.allclose(L @ L.T, A, atol=1e-10)


def test_cholesky_names_failing_pivot(backend):
    A = np.diag([1.0, 2.0, -1.0, 4.0])
    with pytest.raises(NotPositiveDefinite) as exc:
        backend.cholesky(A)
    assert exc.value.pivot == 2
    assert "pivot 2" in str(exc.value)


def test_lower_inverse(backend, rng):
    L = np.linalg.cholesky(random_spd(rng, 9))
    assert np.allclose(backend.lower_inverse(L) @ L, np.eye(9), atol=1e-10)


def test_logdet_from_factor(backend, rng):
    A = random_spd(rng, 6)
    sign, ref = np.linalg.slogdet(A)
    assert sign > 0
    assert backend.logdet_from_factor(backend.cholesky(A)) == pytest.approx(ref, abs=1e-10)


def test_nudft_matches_direct_sum(backend, rng):
    x = rng.uniform(-1, 1, 300)
    y = rng.normal(size=300)
    scale, n = 0.02, 1001
    m = np.arange(n)
    ref = (y[None, :] * np.exp(-2j * np.pi * scale * m[:, None] * x[None, :])).sum(axis=1) / 300
    assert np.max(np.abs(backend.nudft(x, y, scale, n) - ref)) < 1e-10


def test_knn_matches_bruteforce(backend, rng):
    X = rng.normal(size=(40, 3))
    d = ((X[:, None] - X[None]) ** 2).sum(-1)
    np.fill_diagonal(d, np.inf)
    ref = np.argsort(d, axis=1, kind="stable")[:, :3]
    assert np.array_equal(backend.knn(X, 3), ref)


def test_knn_ties_go_to_lower_index(backend):
    X = np.array([[0.0], [1.0], [-1.0], [2.0]])
    assert backend.knn(X, 2)[0].tolist() == [1, 2]


def test_neighbor_ratios_duplicate_is_nan(backend):
    X = np.array([[0.0, 0.0], [0.0, 0.0], [3.0, 4.0]])
    Z = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    nb = np.array([[1], [0], [0]])
    out = backend.neighbor_ratios(X, Z, nb)
    assert np.isnan(out[0, 0]) and np.isnan(out[1, 0])
    assert out[2, 0] == pytest.approx(0.0)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
def test_backends_agree(rng):
    py, cc = get_backend("python"), get_backend("compiled")
    A = random_spd(rng, 12)
    assert np.allclose(py.cholesky(A), cc.cholesky(A), atol=1e-12)
    x, y = rng.uniform(size=500), rng.normal(size=500)
    assert np.max(np.abs(py.nudft(x, y, 0.05, 200) - cc.nudft(x, y, 0.05, 200))) < 1e-11
    X, Z = rng.normal(size=(200, 5)), rng.uniform(size=(200, 5))
    nb = py.knn(X, 2)
    assert np.array_equal(nb, cc.knn(X, 2))
    assert np.allclose(py.neighbor_ratios(X, Z, nb), cc.neighbor_ratios(X, Z, nb), atol=1e-13)


def test_read_only_inputs_accepted(backend):
    X = np.random.default_rng(0).normal(size=(6, 3))
    X.setflags(write=False)
    nb = backend.knn(X, 2)
    nb.setflags(write=False)
    backend.neighbor_ratios(X, X, nb)
    x = X[:, 0].copy()
    x.setflags(write=False)
    backend.nudft(x, x, 0.1, 4)
    A = np.eye(3)
    A.setflags(write=False)
    backend.cholesky(A)
