"""Differentiable operations on tape Vars.

Reductions accumulate in float64 and cast back to the input dtype. Gradients
broadcast back to parent shapes through ``_unbroadcast``.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Var


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    g = grad
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.astype(grad.dtype, copy=False)


def add(a: Var, b: Var) -> Var:
    out = Var(a.data + b.data, (a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(g, b.shape))
    out._backward = backward
    return out


def sub(a: Var, b: Var) -> Var:
    out = Var(a.data - b.data, (a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(-_unbroadcast(g, b.shape))
    out._backward = backward
    return out


def mul(a: Var, b: Var) -> Var:
    out = Var(a.data * b.data, (a, b))

    def backward(g):
        a.accumulate(_unbroadcast(g * b.data, a.shape))
        b.accumulate(_unbroadcast(g * a.data, b.shape))
    out._backward = backward
    return out


def scale(a: Var, s: float) -> Var:
    out = Var(a.data * s, (a,))

    def backward(g):
        a.accumulate(g * s)
    out._backward = backward
    return out


def square(a: Var) -> Var:
    out = Var(a.data * a.data, (a,))

    def backward(g):
        a.accumulate(g * (2.0 * a.data))
    out._backward = backward
    return out


def vabs(a: Var) -> Var:
    # subgradient at 0 is 0, matching relu's convention
    out = Var(np.abs(a.data), (a,))

    def backward(g):
        a.accumulate(g * np.sign(a.data))
    out._backward = backward
    return out


def relu(a: Var) -> Var:
    mask = a.data > 0
    out = Var(np.where(mask, a.data, 0), (a,))

    def backward(g):
        a.accumulate(g * mask)
    out._backward = backward
    return out


def matmul(a: Var, b: Var) -> Var:
    out = Var(np.matmul(a.data, b.data), (a, b))

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        a.accumulate(_unbroadcast(ga, a.shape))
        b.accumulate(_unbroadcast(gb, b.shape))
    out._backward = backward
    return out


def transpose2d(a: Var) -> Var:
    out = Var(a.data.T, (a,))

    def backward(g):
        a.accumulate(g.T)
    out._backward = backward
    return out


def reshape(a: Var, shape) -> Var:
    old = a.shape
    out = Var(a.data.reshape(shape), (a,))

    def backward(g):
        a.accumulate(g.reshape(old))
    out._backward = backward
    return out


def concat(vars_, axis: int = 0) -> Var:
    vars_ = list(vars_)
    sizes = [v.shape[axis] for v in vars_]
    out = Var(np.concatenate([v.data for v in vars_], axis=axis), tuple(vars_))

    def backward(g):
        start = 0
        for v, n in zip(vars_, sizes):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(start, start + n)
            v.accumulate(g[tuple(sl)])
            start += n
    out._backward = backward
    return out


def narrow(a: Var, axis: int, start: int, length: int) -> Var:
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    out = Var(a.data[sl], (a,))

    def backward(g):
        full = np.zeros_like(a.data)
        full[sl] = g
        a.accumulate(full)
    out._backward = backward
    return out


def vsum(a: Var, axis=None, keepdims: bool = False) -> Var:
    out_data = a.data.sum(axis=axis, keepdims=keepdims, dtype=np.float64)
    out = Var(out_data.astype(a.dtype), (a,))

    def backward(g):
        gg = g
        if axis is not None and not keepdims:
            gg = np.expand_dims(g, axis)
        a.accumulate(np.broadcast_to(gg, a.shape).astype(a.dtype, copy=False))
    out._backward = backward
    return out


def vmean(a: Var, axis=None, keepdims: bool = False) -> Var:
    n = a.data.size if axis is None else a.data.shape[axis]
    return scale(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def take(a: Var, idx) -> Var:
    """Gather along the first axis; duplicate indices accumulate gradients."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Var(a.data[idx], (a,))

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        a.accumulate(full)
    out._backward = backward
    return out


def segment_sum(a: Var, segment_ids, num_segments: int) -> Var:
    """Sum rows into segments; rows are accumulated in array order."""
    seg = np.asarray(segment_ids, dtype=np.intp)
    out_data = np.zeros((num_segments,) + a.shape[1:], dtype=a.dtype)
    np.add.at(out_data, seg, a.data)
    out = Var(out_data, (a,))

    def backward(g):
        a.accumulate(g[seg])
    out._backward = backward
    return out


def linear(x: Var, w: Var, b: Var | None = None) -> Var:
    out = matmul(x, w)
    if b is not None:
        out = add(out, b)
    return out


def bce_logits_elem(logits: Var, labels: np.ndarray) -> Var:
    """Elementwise binary cross-entropy on logits, numerically stable."""
    z = logits.data
    y = np.asarray(labels, dtype=z.dtype)
    data = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out = Var(data, (logits,))

    def backward(g):
        sig = 1.0 / (1.0 + np.exp(-z))
        logits.accumulate(g * (sig - y))
    out._backward = backward
    return out


_CONV_IDX_CACHE: dict = {}


def _conv_indices(cin, d, h, w, k, stride, pad):
    key = (cin, d, h, w, k, stride, pad)
    hit = _CONV_IDX_CACHE.get(key)
    if hit is not None:
        return hit
    dp, hp, wp = d + 2 * pad, h + 2 * pad, w + 2 * pad
    od = (dp - k) // stride + 1
    oh = (hp - k) // stride + 1
    ow = (wp - k) // stride + 1
    kd, kh, kw = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
    koff = np.stack([kd.ravel(), kh.ravel(), kw.ravel()], axis=1)  # (k^3, 3)
    odc, ohc, owc = np.meshgrid(np.arange(od) * stride, np.arange(oh) * stride,
                                np.arange(ow) * stride, indexing="ij")
    base = np.stack([odc.ravel(), ohc.ravel(), owc.ravel()], axis=1)  # (P, 3)
    idx = koff[:, None, :] + base[None, :, :]   # (k^3, P, 3)
    idx_d = idx[..., 0].astype(np.intp)
    idx_h = idx[..., 1].astype(np.intp)
    idx_w = idx[..., 2].astype(np.intp)
    flat = (idx_d * hp + idx_h) * wp + idx_w    # (k^3, P) within one channel
    per_chan = flat[None] + (np.arange(cin) * (dp * hp * wp))[:, None, None]
    scatter_idx = per_chan.reshape(-1)          # (cin * k^3 * P,)
    entry = (idx_d, idx_h, idx_w, scatter_idx, (od, oh, ow), (dp, hp, wp))
    _CONV_IDX_CACHE[key] = entry
    return entry


def conv3d(x: Var, w: Var, b: Var, stride: int = 2, padding: int = 1) -> Var:
    """3D convolution via volume-to-column gathering and one matmul.

    x: (B, Cin, D, H, W); w: (Cout, Cin, k, k, k); b: (Cout,).
    """
    bsz, cin, d, h, wd = x.shape
    cout, cin_w, k, _, _ = w.shape
    if cin_w != cin:
        raise ValueError(f"conv3d channel mismatch: input {cin}, weight {cin_w}")
    idx_d, idx_h, idx_w, scatter_idx, (od, oh, ow), (dp, hp, wp) = _conv_indices(
        cin, d, h, wd, k, stride, padding)
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0)) + ((padding, padding),) * 3)
    else:
        xp = x.data
    col = xp[:, :, idx_d, idx_h, idx_w]                  # (B, Cin, k^3, P)
    p = col.shape[-1]
    col = col.reshape(bsz, cin * k ** 3, p)
    wmat = w.data.reshape(cout, cin * k ** 3)
    out_data = np.matmul(wmat, col) + b.data[:, None]    # (B, Cout, P)
    out = Var(out_data.reshape(bsz, cout, od, oh, ow), (x, w, b))

    def backward(g):
        g2 = g.reshape(bsz, cout, p)
        gw = np.einsum("bop,bkp->ok", g2, col, optimize=True)
        w.accumulate(gw.reshape(w.shape).astype(w.dtype, copy=False))
        gb = g2.sum(axis=(0, 2), dtype=np.float64)
        b.accumulate(gb.astype(b.dtype, copy=False))
        gcol = np.matmul(wmat.T, g2)                     # (B, Cin*k^3, P)
        gx = np.empty((bsz, cin, dp, hp, wp), dtype=x.dtype)
        size = cin * dp * hp * wp
        for bi in range(bsz):
            acc = np.bincount(scatter_idx, weights=gcol[bi].ravel(), minlength=size)
            gx[bi] = acc.reshape(cin, dp, hp, wp).astype(x.dtype, copy=False)
        if padding:
            gx = gx[:, :, padding:-padding, padding:-padding, padding:-padding]
        x.accumulate(gx)
    out._backward = backward
    return out


def sum_pool(a: Var, axis: int = 1) -> Var:
    """Sum over one axis; output is invariant to permutations along it."""
    return vsum(a, axis=axis)


def byte_argsort(mat: np.ndarray) -> np.ndarray:
    """Label-free total order over rows: lexicographic on raw bytes.

    Identical rows tie; any tie order yields identical downstream sums.
    """
    m = np.ascontiguousarray(mat)
    if m.ndim == 1:
        m = m[:, None]
    void = m.view(np.dtype((np.void, m.dtype.itemsize * m.shape[1]))).ravel()
    return np.argsort(void, kind="stable")


def sorted_sum(a: Var, axis0_order: np.ndarray | None = None) -> Var:
    """Sum rows after putting them in a canonical byte order, so the result
    does not depend on the caller's row ordering."""
    order = byte_argsort(a.data) if axis0_order is None else axis0_order
    return vsum(take(a, order), axis=0)
