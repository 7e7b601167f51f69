"""Numeric substrate: autodiff tape, SPD log-determinant, erf, seeded RNG."""

from idc.numcore import tape as ops
from idc.numcore.gradcheck import grad_check, tape_gradient
from idc.numcore.linalg import cholesky_logdet, logdet_and_inverse
from idc.numcore.rng import Rng
from idc.numcore.special import erf, normal_cdf
from idc.numcore.tape import Gradients, Tape, Var

__all__ = [
    "Gradients", "Rng", "Tape", "Var", "cholesky_logdet", "erf", "grad_check",
    "logdet_and_inverse", "normal_cdf", "ops", "tape_gradient",
]
