"""Adam with bias correction; moments kept in float64 for reproducible updates."""

from __future__ import annotations

import numpy as np

from ..errors import NumericError
from .autodiff import Var


class Adam:
    """Optimizer state plus the update rule for a named set of parameters."""

    def __init__(self, params: dict[str, Var], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 lr_decay: float = 1.0):
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.lr_decay = lr_decay
        self.step_count = 0
        self.m = {k: np.zeros(p.data.shape, dtype=np.float64) for k, p in self.params.items()}
        self.v = {k: np.zeros(p.data.shape, dtype=np.float64) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self, grads: dict[str, np.ndarray] | None = None):
        """Apply one bias-corrected update from ``grads`` or the Vars' grads."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for k, p in self.params.items():
            g = grads[k] if grads is not None else p.grad
            if g is None:
                g = np.zeros_like(p.data)
            g = np.asarray(g, dtype=np.float64)
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for {k}")
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            delta = -self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            p.data = (p.data.astype(np.float64) + delta).astype(p.data.dtype)

    def decay_epoch(self):
        self.lr *= self.lr_decay
