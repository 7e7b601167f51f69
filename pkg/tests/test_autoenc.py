"""Gated denoising autoencoder and the stage-1 objective."""

from __future__ import annotations

import numpy as np
import pytest

from idc import autoenc, gates, nn
from idc.errors import NumericalError
from idc.numcore import Rng, grad_check, ops

D = 5


def small_cfg(**kw):
    return autoenc.AeConfig(hidden=[6], d_h=3, **kw)


def params_for(cfg, seed=0):
    rng = Rng(seed)
    p = gates.init_gating_network(D, 4, rng)
    p.update(autoenc.init_autoencoder(D, cfg, rng))
    return p


def test_shapes_and_mirroring():
    cfg = autoenc.AeConfig(hidden=[16, 8], d_h=4)
    p = autoenc.init_autoencoder(D, cfg, Rng(0))
    assert [p[f"enc.W{i}"].shape for i in range(3)] == [(5, 16), (16, 8), (8, 4)]
    assert [p[f"dec.W{i}"].shape for i in range(3)] == [(4, 8), (8, 16), (16, 5)]
    h = autoenc.encode(p, np.zeros((1, D)))
    assert h.shape == (1, 4)


def test_zero_input_zero_bias_gives_zero_embedding():
    cfg = small_cfg()
    p = autoenc.init_autoencoder(D, cfg, Rng(0))
    for k in p:
        if ".b" in k:
            p[k] = np.zeros_like(p[k])
    assert np.array_equal(autoenc.encode(p, np.zeros((2, D))), np.zeros((2, 3)))


def test_dimension_mismatch():
    p = autoenc.init_autoencoder(D, small_cfg(), Rng(0))
    with pytest.raises(ValueError):
        autoenc.encode(p, np.zeros((2, D + 1)))


def test_config_validation():
    assert small_cfg().validate() == []
    bad = autoenc.AeConfig(hidden=[1, 1, 1, 1, 1], d_h=1, m_rand=2.0, sigma_h=-1)
    assert len(bad.validate()) == 4


def test_perfect_autoencoder_zero_loss():
    """Identity network: linear layers, no noise, gates forced open, no penalty."""
    cfg = autoenc.AeConfig(hidden=[D], d_h=D, m_rand=0.0, sigma_h=0.0, gtcr=False)
    p = {}
    for pre in ("enc", "dec"):
        for i in range(2):
            p[f"{pre}.W{i}"] = np.eye(D)
            p[f"{pre}.b{i}"] = np.zeros((1, D))
    x = np.random.default_rng(0).uniform(0.1, 1.0, size=(4, D))  # positive: leaky part inactive
    total, br = autoenc.sparse_loss(x, p, gates.GateConfig(), cfg, 0.0, Rng(0),
                                    z_override=np.ones_like(x))
    assert float(total) == 0.0
    assert set(br) == {"recon_clean", "recon_input", "recon_latent", "total"}


def test_all_open_reduces_to_plain_l1():
    cfg = small_cfg(input_denoise=False, latent_denoise=False, gtcr=False)
    p = params_for(cfg)
    x = np.random.default_rng(1).normal(size=(6, D))
    _, br = autoenc.sparse_loss(x, p, gates.GateConfig(), cfg, 0.0, Rng(0),
                                z_override=np.ones_like(x))
    direct = np.mean(np.abs(autoenc.decode(p, autoenc.encode(p, x)) - x))
    assert br["recon_clean"] == pytest.approx(direct, abs=1e-14)


def test_breakdown_signs():
    cfg = small_cfg()
    p = params_for(cfg)
    x = np.random.default_rng(2).normal(size=(8, D))
    _, br = autoenc.sparse_loss(x, p, gates.GateConfig(), cfg, 0.5, Rng(3))
    assert br["gtcr"] <= 0
    assert all(br[k] >= 0 for k in ("recon_clean", "recon_input", "recon_latent", "reg"))


def test_zero_mask_rate_input_term_equals_clean_term():
    cfg = small_cfg(m_rand=0.0, latent_denoise=False)
    p = params_for(cfg)
    x = np.random.default_rng(6).normal(size=(5, D))
    _, br = autoenc.sparse_loss(x, p, gates.GateConfig(), cfg, 0.0, Rng(0))
    assert br["recon_input"] == br["recon_clean"]


@pytest.mark.parametrize("term", ["recon_clean", "recon_input", "recon_latent", "reg", "gtcr"])
def test_stage1_term_gradients(term):
    cfg = small_cfg()
    x = np.random.default_rng(4).uniform(size=(6, D))
    base = params_for(cfg, seed=5)

    def loss(**p):
        _, br_terms = _terms(x, p, cfg)
        return br_terms[term]

    for point in range(3):
        pert = {k: v + 0.01 * np.random.default_rng(point).normal(size=v.shape)
                for k, v in base.items()}
        assert grad_check(loss, pert) < 1e-4


def _terms(x, p, cfg):
    rng = Rng(11)  # same draws on every evaluation
    mu, z = autoenc.local_gates(p, x, gates.GateConfig(), cfg, rng, gates.TRAIN)
    terms = autoenc.reconstruction_terms(p, x, z, cfg, rng)
    terms["reg"] = gates.reg_loss(mu, 0.5)
    terms["gtcr"] = gates.gtcr_loss(z, 1.0)
    return None, terms


def test_nonfinite_loss_names_term():
    cfg = small_cfg()
    p = params_for(cfg)
    p["dec.b1"] = np.full_like(p["dec.b1"], np.inf)
    with pytest.raises(NumericalError, match="recon_clean"):
        autoenc.sparse_loss(np.ones((3, D)), p, gates.GateConfig(), cfg, 0.1, Rng(0))
