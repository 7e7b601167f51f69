"""Gated denoising autoencoder and the stage-1 sparse objective.

The reconstruction loss is the sum of three L1 terms, each a mean over batch
and features:

* clean: ``dec(enc(x * z))`` against ``x``
* input denoising: ``dec(enc(x * z * m))`` with a Bernoulli keep-mask ``m``
  that zeroes about ``m_rand`` of the entries
* latent denoising: ``dec(enc(x * z) * eta)`` with ``eta ~ N(1, sigma_h^2)``

and the sparse objective adds the gate total-coding-rate term and the
scheduled expected-L0 penalty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from idc import gates, nn
from idc.errors import NumericalError
from idc.numcore import ops
from idc.numcore.rng import Rng


@dataclass
class AeConfig:
    hidden: list[int] = field(default_factory=lambda: [64, 32])
    d_h: int = 8
    activation: str = "leaky_relu"
    m_rand: float = 0.3
    sigma_h: float = 0.2
    gate_clean_path: bool = True
    # ablation switches
    use_gates: bool = True
    recon: bool = True
    input_denoise: bool = True
    latent_denoise: bool = True
    gtcr: bool = True

    def validate(self) -> list[str]:
        problems = []
        if not 1 <= len(self.hidden) <= 4 or any(w < 1 for w in self.hidden):
            problems.append("ae.hidden must list 1 to 4 positive widths")
        if self.d_h < 2:
            problems.append("ae.d_h must be >= 2")
        if self.activation != "leaky_relu":
            problems.append("ae.activation must be 'leaky_relu'")
        if not 0.0 <= self.m_rand <= 1.0:
            problems.append("ae.m_rand must lie in [0, 1]")
        if not self.sigma_h >= 0:
            problems.append("ae.sigma_h must be >= 0")
        return problems


def init_autoencoder(d: int, cfg: AeConfig, rng: Rng) -> dict:
    widths = [d, *cfg.hidden, cfg.d_h]
    params = nn.init_mlp("enc", widths, rng)
    params.update(nn.init_mlp("dec", widths[::-1], rng))
    return params


def encode(params: dict, x_gated):
    return nn.mlp(params, "enc", x_gated)


def decode(params: dict, h):
    return nn.mlp(params, "dec", h)


def l1(pred, target):
    return ops.mean(ops.vabs(ops.sub(pred, target)))


def local_gates(params: dict, x, gate_cfg: gates.GateConfig, ae_cfg: AeConfig,
                rng: Rng | None, mode: str):
    """Gate logits and realized gates; ungated models return all-ones gates."""
    if not ae_cfg.use_gates:
        return None, np.ones(np.shape(x))
    mu = gates.gate_logits(params, x)
    return mu, gates.gate_forward(mu, rng, mode, gate_cfg.sigma)


def reconstruction_terms(params: dict, x: np.ndarray, z, cfg: AeConfig, rng: Rng) -> dict:
    xg = ops.mul(x, z)
    h = encode(params, xg)
    terms = {}
    if cfg.gate_clean_path:
        terms["recon_clean"] = l1(decode(params, h), x)
    else:
        terms["recon_clean"] = l1(decode(params, encode(params, x)), x)
    if cfg.input_denoise:
        keep = rng.bernoulli(1.0 - cfg.m_rand, np.shape(x))
        terms["recon_input"] = l1(decode(params, encode(params, ops.mul(xg, keep))), x)
    if cfg.latent_denoise:
        eta = rng.normal(np.shape(h), loc=1.0, scale=cfg.sigma_h)
        terms["recon_latent"] = l1(decode(params, ops.mul(h, eta)), x)
    return terms


def sparse_loss(x: np.ndarray, params: dict, gate_cfg: gates.GateConfig, ae_cfg: AeConfig,
                lam: float, rng: Rng, z_override=None):
    """Stage-1 loss. Returns ``(total, breakdown)``; ``total`` is a tape Var
    when ``params`` holds Vars. ``z_override`` replaces the sampled gates
    (used for warm-up with all gates open)."""
    if z_override is not None:
        mu, z = None, z_override
    else:
        mu, z = local_gates(params, x, gate_cfg, ae_cfg, rng, gates.TRAIN)
    terms = reconstruction_terms(params, x, z, ae_cfg, rng) if ae_cfg.recon else {}
    if mu is not None:
        if ae_cfg.gtcr:
            terms["gtcr"] = gates.gtcr_loss(z, gate_cfg.eps_gtcr)
        terms["reg"] = gates.reg_loss(mu, gate_cfg.sigma)
    total = 0.0
    for name, t in terms.items():
        total = ops.add(total, ops.mul(t, lam) if name == "reg" else t)
    breakdown = {name: float(np.asarray(ops.constant(t))) for name, t in terms.items()}
    bad = [name for name, v in breakdown.items() if not np.isfinite(v)]
    if bad:
        raise NumericalError(f"non-finite stage-1 loss term(s): {', '.join(bad)}")
    breakdown["total"] = float(np.asarray(ops.constant(total)))
    return total, breakdown
