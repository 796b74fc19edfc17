"""Loss primitives with exact gradients.

Each primitive accepts tape Vars (returning a scalar Var) or plain numbers /
arrays (returning a float). Rowwise losses treat the first axis as samples.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .autodiff import Var


def _rows(v: Var) -> Var:
    if v.data.ndim < 2:
        return ops.reshape(v, (1, -1))
    if v.data.ndim > 2:
        return ops.reshape(v, (v.data.shape[0], -1))
    return v


def _as_pair(a, b):
    wrap = isinstance(a, Var) or isinstance(b, Var)
    av = a if isinstance(a, Var) else Var(np.asarray(a, dtype=np.float64))
    bv = b if isinstance(b, Var) else Var(np.asarray(b, dtype=av.dtype))
    return av, bv, wrap


def mse(a, b):
    """Mean over samples of the squared L2 distance between rows."""
    av, bv, wrap = _as_pair(a, b)
    diff = _rows(ops.sub(av, bv))
    per_row = ops.vsum(ops.square(diff), axis=1)
    out = ops.vmean(per_row)
    return out if wrap else float(out.data)


def l1(a, b):
    """Mean over samples of the L1 distance between rows."""
    av, bv, wrap = _as_pair(a, b)
    diff = _rows(ops.sub(av, bv))
    per_row = ops.vsum(ops.vabs(diff), axis=1)
    out = ops.vmean(per_row)
    return out if wrap else float(out.data)


def bce_with_logits(logits, labels):
    """Mean stable binary cross-entropy on raw logits."""
    wrap = isinstance(logits, Var)
    lv = logits if wrap else Var(np.asarray(logits, dtype=np.float64))
    out = ops.vmean(ops.bce_logits_elem(lv, labels))
    return out if wrap else float(out.data)


def triplet(d_ap, d_an, gamma: float):
    """Hinge loss max(0, d_ap - d_an + gamma), averaged when given arrays."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    wrap = isinstance(d_ap, Var) or isinstance(d_an, Var)
    if not wrap:
        ap = np.asarray(d_ap, dtype=np.float64)
        an = np.asarray(d_an, dtype=np.float64)
        if np.any(ap < 0) or np.any(an < 0):
            raise ValueError("distances must be non-negative")
        return float(np.mean(np.maximum(ap - an + gamma, 0.0)))
    av = d_ap if isinstance(d_ap, Var) else Var(np.asarray(d_ap, dtype=np.float64))
    bv = d_an if isinstance(d_an, Var) else Var(np.asarray(d_an, dtype=av.dtype))
    g = Var(np.asarray(gamma, dtype=av.dtype))
    return ops.vmean(ops.relu(ops.add(ops.sub(av, bv), g)))
