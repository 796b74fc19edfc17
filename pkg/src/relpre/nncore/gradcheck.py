"""Central finite-difference gradient verification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Var
from .layers import Network


@dataclass
class GradcheckReport:
    tolerance: float
    block_errors: dict[str, float] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.block_errors.values()) if self.block_errors else 0.0

    @property
    def passed(self) -> bool:
        return all(e <= self.tolerance for e in self.block_errors.values())

    def rows(self):
        return [{"block": k, "rel_error": v, "passed": v <= self.tolerance}
                for k, v in self.block_errors.items()]


def gradcheck_scalar(params: dict[str, Var], fn, tolerance: float = 1e-4,
                     h: float = 1e-4) -> GradcheckReport:
    """Compare analytic gradients of the scalar ``fn()`` against central
    finite differences, one relative error per parameter block.

    The relative error normalizes the worst absolute deviation by the block's
    largest gradient magnitude.
    """
    for p in params.values():
        p.zero_grad()
    out = fn()
    if out.data.size != 1:
        raise ValueError("gradcheck_scalar needs a scalar objective")
    out.backward(np.ones_like(out.data))
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}
    report = GradcheckReport(tolerance=tolerance)
    for k, p in params.items():
        fd = np.zeros_like(p.data, dtype=np.float64)
        flat = p.data.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = float(fn().data)
            flat[i] = orig - h
            f_minus = float(fn().data)
            flat[i] = orig
            fd_flat[i] = (f_plus - f_minus) / (2.0 * h)
        a = analytic[k].astype(np.float64)
        denom = max(float(np.max(np.abs(a))), float(np.max(np.abs(fd))), 1e-8)
        report.block_errors[k] = float(np.max(np.abs(a - fd))) / denom
    return report


def gradcheck(network: Network, x: np.ndarray, tolerance: float = 1e-4,
              h: float = 1e-4, seed: int = 0) -> GradcheckReport:
    """Gradcheck a network through a fixed random projection of its output."""
    out_probe, _ = network.forward(x)
    proj = np.random.default_rng(seed).normal(size=out_probe.shape).astype(np.float64)

    def objective():
        xv = Var(np.asarray(x, dtype=network.dtype))
        out = network.apply(xv)
        from . import ops
        return ops.vsum(ops.mul(out, Var(proj.astype(network.dtype))))

    return gradcheck_scalar(network.params, objective, tolerance=tolerance, h=h)
