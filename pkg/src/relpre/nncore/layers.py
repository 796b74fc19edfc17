"""Layer specifications and sequential networks built on the autodiff tape."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .autodiff import Var, check_finite

LAYER_KINDS = ("fc", "relu", "conv3d", "flatten", "concat", "sum_pool")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a composed network.

    fc uses ``out_dim``; conv3d uses ``channels``/``kernel``/``stride``/
    ``padding``; sum_pool and concat use ``axis``. ``concat`` only appears in
    composite model descriptors, not in sequential chains.
    """

    kind: str
    out_dim: int = 0
    channels: int = 0
    kernel: int = 3
    stride: int = 2
    padding: int = 1
    axis: int = 1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def descriptor(self) -> str:
        if self.kind == "fc":
            return f"fc:{self.out_dim}"
        if self.kind == "conv3d":
            return f"conv3d:{self.channels}k{self.kernel}s{self.stride}p{self.padding}"
        if self.kind == "sum_pool":
            return f"sum_pool:a{self.axis}"
        return self.kind


def init_linear_params(rng, fan_in: int, fan_out: int, dtype) -> tuple[np.ndarray, np.ndarray]:
    """Fan-in-scaled uniform weights, zero biases."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
    b = np.zeros(fan_out, dtype=dtype)
    return w, b


def init_conv_params(rng, cin: int, cout: int, kernel: int, dtype):
    fan_in = cin * kernel ** 3
    bound = 1.0 / np.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(cout, cin, kernel, kernel, kernel)).astype(dtype)
    b = np.zeros(cout, dtype=dtype)
    return w, b


class Cache:
    """Holds the tape from one forward pass for the paired backward call."""

    def __init__(self, net, input_var: Var, output_var: Var):
        self.net = net
        self.input = input_var
        self.output = output_var


class Network:
    """A sequential network over LayerSpecs with named parameters."""

    def __init__(self, specs, input_shape, seed: int = 0, dtype=np.float32):
        self.specs = tuple(specs)
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        self.params: dict[str, Var] = {}
        rng = np.random.default_rng(seed)
        shape = tuple(input_shape)
        self.shapes = [shape]
        for i, spec in enumerate(self.specs):
            if spec.kind == "fc":
                if len(shape) != 2:
                    raise ValueError(f"layer {i} (fc): expected 2D input, got {shape}")
                w, b = init_linear_params(rng, shape[1], spec.out_dim, self.dtype)
                self.params[f"layer{i}.w"] = Var(w, name=f"layer{i}.w")
                self.params[f"layer{i}.b"] = Var(b, name=f"layer{i}.b")
                shape = (shape[0], spec.out_dim)
            elif spec.kind == "conv3d":
                if len(shape) != 5:
                    raise ValueError(f"layer {i} (conv3d): expected 5D input, got {shape}")
                w, b = init_conv_params(rng, shape[1], spec.channels, spec.kernel, self.dtype)
                self.params[f"layer{i}.w"] = Var(w, name=f"layer{i}.w")
                self.params[f"layer{i}.b"] = Var(b, name=f"layer{i}.b")
                spatial = tuple(
                    (s + 2 * spec.padding - spec.kernel) // spec.stride + 1
                    for s in shape[2:])
                if any(s < 1 for s in spatial):
                    raise ValueError(f"layer {i} (conv3d): output collapsed, input {shape}")
                shape = (shape[0], spec.channels) + spatial
            elif spec.kind == "flatten":
                shape = (shape[0], int(np.prod(shape[1:])))
            elif spec.kind == "sum_pool":
                shape = tuple(s for ax, s in enumerate(shape) if ax != spec.axis)
            elif spec.kind == "relu":
                pass
            else:
                raise ValueError(f"layer {i}: kind {spec.kind!r} not usable in a chain")
            self.shapes.append(shape)

    @property
    def output_shape(self):
        return self.shapes[-1]

    def descriptor(self) -> str:
        return ";".join(s.descriptor() for s in self.specs)

    def apply(self, v: Var) -> Var:
        """Run the layer chain on an existing tape node."""
        for i, spec in enumerate(self.specs):
            expect = self.shapes[i]
            if v.data.shape[1:] != expect[1:]:
                raise ValueError(
                    f"layer {i} ({spec.kind}): input shape {v.data.shape} "
                    f"does not match expected {expect}")
            if spec.kind == "fc":
                v = ops.linear(v, self.params[f"layer{i}.w"], self.params[f"layer{i}.b"])
            elif spec.kind == "relu":
                v = ops.relu(v)
            elif spec.kind == "conv3d":
                v = ops.conv3d(v, self.params[f"layer{i}.w"], self.params[f"layer{i}.b"],
                               stride=spec.stride, padding=spec.padding)
            elif spec.kind == "flatten":
                v = ops.reshape(v, (v.data.shape[0], -1))
            elif spec.kind == "sum_pool":
                v = ops.sum_pool(v, axis=spec.axis)
        return v

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, Cache]:
        """Deterministic forward pass; the cache carries what backward needs."""
        xv = Var(np.asarray(x, dtype=self.dtype))
        out = self.apply(xv)
        check_finite(out, "network output")
        return out.data, Cache(self, xv, out)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]):
        for k, p in self.params.items():
            if k not in arrays:
                raise ValueError(f"missing parameter {k}")
            if arrays[k].shape != p.data.shape:
                raise ValueError(f"shape mismatch for {k}")
            p.data = arrays[k].astype(self.dtype).copy()


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    return net.forward(x)


def backward(net: Network, cache: Cache | None, upstream: np.ndarray):
    """Exact reverse-mode gradients of the cached forward pass.

    Returns (parameter gradients by name, input gradient).
    """
    if cache is None or cache.net is not net:
        raise ValueError("missing or mismatched forward cache")
    net.zero_grad()
    cache.input.zero_grad()
    cache.output.backward(np.asarray(upstream, dtype=net.dtype))
    grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
             for k, p in net.params.items()}
    gin = cache.input.grad
    if gin is None:
        gin = np.zeros_like(cache.input.data)
    return grads, gin
