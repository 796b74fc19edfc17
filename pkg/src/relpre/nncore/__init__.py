"""Minimal differentiable-computation core: numpy-backed reverse-mode tape,
dense/conv3d layers, loss primitives, Adam, gradient checking, checkpoints."""

from . import ops
from .autodiff import Var, check_finite
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import GradcheckReport, gradcheck, gradcheck_scalar
from .layers import LayerSpec, Network, backward, forward, init_linear_params
from .losses import bce_with_logits, l1, mse, triplet
from .optim import Adam

__all__ = [
    "Adam", "GradcheckReport", "LayerSpec", "Network", "Var",
    "backward", "bce_with_logits", "check_finite", "forward", "gradcheck",
    "gradcheck_scalar", "init_linear_params", "l1", "load_checkpoint", "mse",
    "ops", "save_checkpoint", "triplet",
]
