"""Minimal differentiable layer stack: forward, exact reverse-mode gradients, Adam.

Tensors are plain NumPy arrays (row-major), batched along axis 0; images are
NHWC. Parameters live in one flat float32 buffer per network with per-layer
views, which makes optimizer state and serialization trivial. Forward passes
follow the input dtype so gradient checks can run in float64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeMismatch
from .kernels import numpy_impl
from .render import depth_to_space, space_to_depth


def _he_uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


@dataclass(frozen=True)
class Dense:
    in_dim: int
    out_dim: int
    kind = "dense"

    @property
    def param_count(self) -> int:
        return self.in_dim * self.out_dim + self.out_dim

    def out_shape(self, in_shape):
        if in_shape != (self.in_dim,):
            raise ShapeMismatch(f"dense expects ({self.in_dim},), got {in_shape}")
        return (self.out_dim,)

    def init(self, rng):
        w = _he_uniform(rng, self.in_dim, (self.in_dim, self.out_dim))
        return np.concatenate([w.ravel(), np.zeros(self.out_dim)])

    def _views(self, p):
        n = self.in_dim * self.out_dim
        return p[:n].reshape(self.in_dim, self.out_dim), p[n:]

    def forward(self, p, x):
        w, b = self._views(p)
        return x @ w + b, x

    def backward(self, p, cache, gy):
        w, _ = self._views(p)
        x = cache
        gw = x.T @ gy
        gb = gy.sum(axis=0)
        gx = gy @ w.T
        return np.concatenate([gw.ravel(), gb]), gx


@dataclass(frozen=True)
class ReLU:
    kind = "relu"
    param_count = 0

    def out_shape(self, in_shape):
        return in_shape

    def init(self, rng):
        return np.zeros(0)

    def forward(self, p, x):
        mask = x > 0
        return np.where(mask, x, 0.0).astype(x.dtype), mask

    def backward(self, p, cache, gy):
        return np.zeros(0, dtype=gy.dtype), np.where(cache, gy, 0.0).astype(gy.dtype)


@dataclass(frozen=True)
class Tanh:
    kind = "tanh"
    param_count = 0

    def out_shape(self, in_shape):
        return in_shape

    def init(self, rng):
        return np.zeros(0)

    def forward(self, p, x):
        y = np.tanh(x)
        return y, y

    def backward(self, p, cache, gy):
        return np.zeros(0, dtype=gy.dtype), gy * (1.0 - cache * cache)


@dataclass(frozen=True)
class Flatten:
    kind = "flatten"
    param_count = 0

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def init(self, rng):
        return np.zeros(0)

    def forward(self, p, x):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, p, cache, gy):
        return np.zeros(0, dtype=gy.dtype), gy.reshape(cache)


@dataclass(frozen=True)
class SpaceToDepth:
    block: int
    kind = "space_to_depth"
    param_count = 0

    def out_shape(self, in_shape):
        h, w, c = in_shape
        b = self.block
        if h % b or w % b:
            raise ShapeMismatch(f"block {b} does not divide {in_shape}")
        return (h // b, w // b, c * b * b)

    def init(self, rng):
        return np.zeros(0)

    def forward(self, p, x):
        return space_to_depth(x, self.block), None

    def backward(self, p, cache, gy):
        return np.zeros(0, dtype=gy.dtype), depth_to_space(gy, self.block)


@dataclass(frozen=True)
class DepthwiseSeparableConv:
    """Per-channel k x k convolution followed by a 1x1 cross-channel mix.

    Same padding, configurable stride; parameter count in_ch*k^2 + in_ch +
    in_ch*out_ch + out_ch, far below a dense convolution for k > 1.
    """

    in_ch: int
    out_ch: int
    kernel: int = 3
    stride: int = 1
    kind = "ds_conv"

    @property
    def param_count(self) -> int:
        return (
            self.in_ch * self.kernel * self.kernel
            + self.in_ch
            + self.in_ch * self.out_ch
            + self.out_ch
        )

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.in_ch:
            raise ShapeMismatch(f"expected {self.in_ch} channels, got {c}")
        return (-(-h // self.stride), -(-w // self.stride), self.out_ch)

    def init(self, rng):
        k = self.kernel
        dw = _he_uniform(rng, k * k, (self.in_ch, k, k))
        pw = _he_uniform(rng, self.in_ch, (self.in_ch, self.out_ch))
        return np.concatenate(
            [dw.ravel(), np.zeros(self.in_ch), pw.ravel(), np.zeros(self.out_ch)]
        )

    def _views(self, p):
        k = self.kernel
        n_dw = self.in_ch * k * k
        n_pw = self.in_ch * self.out_ch
        dw = p[:n_dw].reshape(self.in_ch, k, k)
        dwb = p[n_dw : n_dw + self.in_ch]
        pw = p[n_dw + self.in_ch : n_dw + self.in_ch + n_pw].reshape(self.in_ch, self.out_ch)
        pwb = p[n_dw + self.in_ch + n_pw :]
        return dw, dwb, pw, pwb

    def _pad(self, x):
        n, h, w, c = x.shape
        k, s = self.kernel, self.stride
        ho, wo = -(-h // s), -(-w // s)
        ph = max((ho - 1) * s + k - h, 0)
        pw_ = max((wo - 1) * s + k - w, 0)
        pads = ((0, 0), (ph // 2, ph - ph // 2), (pw_ // 2, pw_ - pw_ // 2), (0, 0))
        return np.pad(x, pads), pads

    def _impl(self, dtype):
        # compiled core is float32-only; float64 (gradient checks) uses the fallback
        return kernels if dtype == np.float32 else numpy_impl

    def forward(self, p, x):
        dw, dwb, pw, pwb = self._views(p)
        x_pad, pads = self._pad(x)
        mid = self._impl(x.dtype).depthwise_forward(x_pad, dw, dwb, self.stride)
        n, ho, wo, _ = mid.shape
        y = (mid.reshape(-1, self.in_ch) @ pw + pwb).reshape(n, ho, wo, self.out_ch)
        return y, (x_pad, pads, mid)

    def backward(self, p, cache, gy):
        dw, dwb, pw, pwb = self._views(p)
        x_pad, pads, mid = cache
        n, ho, wo, _ = gy.shape
        gy_flat = gy.reshape(-1, self.out_ch)
        mid_flat = mid.reshape(-1, self.in_ch)
        g_pw = mid_flat.T @ gy_flat
        g_pwb = gy_flat.sum(axis=0)
        g_mid = (gy_flat @ pw.T).reshape(n, ho, wo, self.in_ch)
        gx_pad, g_dw, g_dwb = self._impl(gy.dtype).depthwise_backward(
            x_pad, dw, g_mid, self.stride
        )
        (_, (pt, pb), (pl, pr), _) = pads
        h_pad, w_pad = x_pad.shape[1], x_pad.shape[2]
        gx = gx_pad[:, pt : h_pad - pb, pl : w_pad - pr, :]
        return (
            np.concatenate([g_dw.ravel(), g_dwb, g_pw.ravel(), g_pwb]),
            np.ascontiguousarray(gx),
        )


LAYER_KINDS = {
    "dense": Dense,
    "relu": ReLU,
    "tanh": Tanh,
    "flatten": Flatten,
    "space_to_depth": SpaceToDepth,
    "ds_conv": DepthwiseSeparableConv,
}


class Network:
    """Ordered layer list over one flat float32 parameter buffer."""

    def __init__(self, layers, input_shape, rng_seed: int = 0):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.rng_seed = int(rng_seed)

        shape = self.input_shape
        self.shapes = [shape]
        for layer in self.layers:
            shape = layer.out_shape(shape)
            self.shapes.append(shape)
        self.output_shape = shape

        self.offsets = np.cumsum([0] + [l.param_count for l in self.layers])
        rng = np.random.default_rng(rng_seed)
        self.params = np.concatenate(
            [l.init(rng) for l in self.layers] + [np.zeros(0)]
        ).astype(np.float32)

    @property
    def num_params(self) -> int:
        return self.params.size

    def _segments(self, params):
        return [
            params[self.offsets[i] : self.offsets[i + 1]] for i in range(len(self.layers))
        ]

    def forward(self, x):
        """Run the stack; returns (output, activations) for a later backward."""
        x = np.asarray(x)
        if x.shape[1:] != self.input_shape:
            raise ShapeMismatch(f"expected input {self.input_shape}, got {x.shape[1:]}")
        params = self.params if x.dtype == np.float32 else self.params.astype(x.dtype)
        acts = []
        for layer, seg in zip(self.layers, self._segments(params)):
            x, cache = layer.forward(seg, x)
            acts.append(cache)
        return x, acts

    def predict(self, x):
        return self.forward(x)[0]

    def backward(self, activations, grad_output):
        """Exact reverse-mode gradients; returns (flat param grads, input grad)."""
        gy = np.asarray(grad_output)
        params = self.params if gy.dtype == np.float32 else self.params.astype(gy.dtype)
        segs = self._segments(params)
        grads = [None] * len(self.layers)
        for i in range(len(self.layers) - 1, -1, -1):
            grads[i], gy = self.layers[i].backward(segs[i], activations[i], gy)
        flat = np.concatenate([g.ravel() for g in grads] + [np.zeros(0, dtype=gy.dtype)])
        return flat, gy

    def astype(self, dtype):
        """Copy with parameters cast (float64 copies are for gradient checks)."""
        net = self.copy()
        net.params = net.params.astype(dtype)
        return net

    def copy(self):
        net = object.__new__(Network)
        net.layers = list(self.layers)
        net.input_shape = self.input_shape
        net.rng_seed = self.rng_seed
        net.shapes = list(self.shapes)
        net.output_shape = self.output_shape
        net.offsets = self.offsets
        net.params = self.params.copy()
        return net

    # -- manifest for serialization ----------------------------------------

    def manifest(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "rng_seed": self.rng_seed,
            "param_count": int(self.num_params),
            "layers": [_layer_to_dict(l) for l in self.layers],
        }

    @classmethod
    def from_manifest(cls, manifest: dict) -> "Network":
        layers = [_layer_from_dict(d) for d in manifest["layers"]]
        net = cls(layers, tuple(manifest["input_shape"]), manifest.get("rng_seed", 0))
        if net.num_params != manifest["param_count"]:
            raise ShapeMismatch("manifest param_count does not match layer stack")
        return net


def _layer_to_dict(layer) -> dict:
    d = {"kind": layer.kind}
    for f in getattr(layer, "__dataclass_fields__", {}):
        d[f] = getattr(layer, f)
    return d


def _layer_from_dict(d: dict):
    kind = d["kind"]
    if kind not in LAYER_KINDS:
        raise ShapeMismatch(f"unknown layer kind {kind!r}")
    kwargs = {k: v for k, v in d.items() if k != "kind"}
    return LAYER_KINDS[kind](**kwargs)


def mse_loss(pred: np.ndarray, target: np.ndarray):
    """Squared-error loss: sum over target dims, mean over the batch.

    Returns (loss, grad wrt pred).
    """
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs target {target.shape}")
    n = pred.shape[0]
    diff = pred - target
    loss = float((diff * diff).sum() / n)
    return loss, (2.0 / n) * diff


class Adam:
    """Standard Adam with bias correction over a flat parameter buffer."""

    def __init__(self, n_params: int, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = np.zeros(n_params, dtype=np.float32)
        self.v = np.zeros(n_params, dtype=np.float32)

    def step(self, params: np.ndarray, grads: np.ndarray) -> None:
        """One in-place update of params."""
        if grads.shape != params.shape:
            raise ShapeMismatch("grad shape does not match params")
        g = grads.astype(np.float32, copy=False)
        self.step_count += 1
        self.m += (1.0 - self.beta1) * (g - self.m)
        self.v += (1.0 - self.beta2) * (g * g - self.v)
        bc1 = 1.0 - self.beta1**self.step_count
        bc2 = 1.0 - self.beta2**self.step_count
        params -= self.lr * (self.m / bc1) / (np.sqrt(self.v / bc2) + self.eps)
