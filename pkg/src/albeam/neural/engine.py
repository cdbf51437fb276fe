"""Small dense-tensor NN engine: layers, backprop and Adam.

Activations are (channels, height, width) float arrays with an implicit batch
of one. Every layer checks its input shape, caches what its backward pass
needs during training, and accumulates parameter gradients in matching
``d<name>`` buffers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError


def _check_chw(x: np.ndarray, channels: int, who: str) -> None:
    if x.ndim != 3 or x.shape[0] != channels:
        raise ConfigurationError(
            f"{who} expects ({channels}, H, W), got {x.shape}")


class Conv2d:
    """Same-padded 2-D convolution, expressed as k*k shifted matmuls."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int,
                 rng: np.random.Generator, dtype: np.dtype):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        fan_in = in_channels * kernel * kernel
        limit = np.sqrt(6.0 / fan_in)
        self.W = rng.uniform(-limit, limit,
                             (out_channels, in_channels, kernel, kernel)).astype(dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.dW = np.zeros_like(self.W)
        self.db = np.zeros_like(self.b)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        _check_chw(x, self.in_channels, "Conv2d")
        c, h, w = x.shape
        k = self.kernel
        p = k // 2
        xp = np.pad(x, ((0, 0), (p, p), (p, p))) if p else x
        y = np.zeros((self.out_channels, h * w), dtype=x.dtype)
        for dy in range(k):
            for dx in range(k):
                patch = xp[:, dy:dy + h, dx:dx + w].reshape(c, -1)
                y += self.W[:, :, dy, dx] @ patch
        y = y.reshape(self.out_channels, h, w) + self.b[:, None, None]
        self._cache = (xp, (h, w)) if train else None
        return y

    def backward(self, g: np.ndarray) -> np.ndarray:
        xp, (h, w) = self._cache
        k = self.kernel
        p = k // 2
        c = self.in_channels
        gflat = g.reshape(self.out_channels, -1)
        self.db += g.sum(axis=(1, 2))
        dxp = np.zeros_like(xp)
        for dy in range(k):
            for dx in range(k):
                patch = xp[:, dy:dy + h, dx:dx + w].reshape(c, -1)
                self.dW[:, :, dy, dx] += gflat @ patch.T
                dxp[:, dy:dy + h, dx:dx + w] += (
                    self.W[:, :, dy, dx].T @ gflat).reshape(c, h, w)
        return dxp[:, p:p + h, p:p + w] if p else dxp

    def param_items(self):
        return [("W", self.W), ("b", self.b)]

    def grad_items(self):
        return [("W", self.dW), ("b", self.db)]

    def state_items(self):
        return []


class BatchNorm2d:
    """Per-channel batch norm over the spatial axes (batch size is 1)."""

    def __init__(self, channels: int, dtype: np.dtype,
                 momentum: float = 0.9, eps: float = 1e-5):
        self.channels = channels
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(channels, dtype=dtype)
        self.beta = np.zeros(channels, dtype=dtype)
        self.dgamma = np.zeros_like(self.gamma)
        self.dbeta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(channels, dtype=dtype)
        self.running_var = np.ones(channels, dtype=dtype)
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        _check_chw(x, self.channels, "BatchNorm2d")
        if train:
            mu = x.mean(axis=(1, 2))
            var = x.var(axis=(1, 2))
            ivar = 1.0 / np.sqrt(var + self.eps)
            xn = (x - mu[:, None, None]) * ivar[:, None, None]
            self.running_mean = (self.momentum * self.running_mean
                                 + (1.0 - self.momentum) * mu)
            self.running_var = (self.momentum * self.running_var
                                + (1.0 - self.momentum) * var)
            self._cache = (xn, ivar)
        else:
            ivar = 1.0 / np.sqrt(self.running_var + self.eps)
            xn = (x - self.running_mean[:, None, None]) * ivar[:, None, None]
            self._cache = None
        return self.gamma[:, None, None] * xn + self.beta[:, None, None]

    def backward(self, g: np.ndarray) -> np.ndarray:
        xn, ivar = self._cache
        n = xn.shape[1] * xn.shape[2]
        self.dgamma += (g * xn).sum(axis=(1, 2))
        self.dbeta += g.sum(axis=(1, 2))
        dxn = g * self.gamma[:, None, None]
        s1 = dxn.sum(axis=(1, 2))
        s2 = (dxn * xn).sum(axis=(1, 2))
        return (ivar[:, None, None] / n) * (
            n * dxn - s1[:, None, None] - xn * s2[:, None, None])

    def param_items(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def grad_items(self):
        return [("gamma", self.dgamma), ("beta", self.dbeta)]

    def state_items(self):
        return [("running_mean", self.running_mean),
                ("running_var", self.running_var)]


class AntiRectifier:
    """Mean-subtract across channels, then concat(ReLU(x), ReLU(-x)).

    Doubles the channel count; no spatial position ever has all outputs dead.
    """

    def __init__(self, channels: int):
        self.channels = channels
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        _check_chw(x, self.channels, "AntiRectifier")
        xh = x - x.mean(axis=0, keepdims=True)
        pos = np.maximum(xh, 0.0)
        neg = np.maximum(-xh, 0.0)
        self._cache = xh if train else None
        return np.concatenate([pos, neg], axis=0)

    def backward(self, g: np.ndarray) -> np.ndarray:
        xh = self._cache
        c = self.channels
        gpos, gneg = g[:c], g[c:]
        dxh = gpos * (xh > 0) - gneg * (xh < 0)
        return dxh - dxh.mean(axis=0, keepdims=True)

    def param_items(self):
        return []

    def grad_items(self):
        return []

    def state_items(self):
        return []


class MaxPool2x2:
    """2x2 max pooling with stride 2; ties resolve to the first element."""

    def __init__(self, channels: int):
        self.channels = channels
        self._cache = None

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        _check_chw(x, self.channels, "MaxPool2x2")
        c, h, w = x.shape
        if h % 2 or w % 2:
            raise ConfigurationError(f"pool input must have even H, W; got {x.shape}")
        blocks = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4)
        flat = blocks.reshape(c, h // 2, w // 2, 4)
        idx = flat.argmax(axis=-1)
        y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
        self._cache = (idx, (c, h, w)) if train else None
        return y

    def backward(self, g: np.ndarray) -> np.ndarray:
        idx, (c, h, w) = self._cache
        scatter = np.zeros((c, h // 2, w // 2, 4), dtype=g.dtype)
        np.put_along_axis(scatter, idx[..., None], g[..., None], axis=-1)
        return (scatter.reshape(c, h // 2, w // 2, 2, 2)
                .transpose(0, 1, 3, 2, 4).reshape(c, h, w))

    def param_items(self):
        return []

    def grad_items(self):
        return []

    def state_items(self):
        return []


class UpsampleNearest2x:
    """Nearest-neighbor 2x spatial upsampling."""

    def __init__(self, channels: int):
        self.channels = channels

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        _check_chw(x, self.channels, "UpsampleNearest2x")
        return x.repeat(2, axis=1).repeat(2, axis=2)

    def backward(self, g: np.ndarray) -> np.ndarray:
        c, h, w = g.shape
        return g.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4))

    def param_items(self):
        return []

    def grad_items(self):
        return []

    def state_items(self):
        return []


class ConvBNAct:
    """Convolution + batch norm + anti-rectifier.

    Emits ``post_channels // 2`` filters so the activation's channel doubling
    lands on ``post_channels``.
    """

    def __init__(self, in_channels: int, post_channels: int, kernel: int,
                 rng: np.random.Generator, dtype: np.dtype):
        if post_channels % 2:
            raise ConfigurationError("post-activation width must be even")
        filters = post_channels // 2
        self.conv = Conv2d(in_channels, filters, kernel, rng, dtype)
        self.bn = BatchNorm2d(filters, dtype)
        self.act = AntiRectifier(filters)
        self.out_channels = post_channels

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        return self.act.forward(self.bn.forward(self.conv.forward(x, train), train), train)

    def backward(self, g: np.ndarray) -> np.ndarray:
        return self.conv.backward(self.bn.backward(self.act.backward(g)))

    def named_children(self):
        return [("conv", self.conv), ("bn", self.bn)]


class DoubleConv:
    """Two stacked conv+BN+anti-rectifier stages at one resolution."""

    def __init__(self, in_channels: int, post_channels: int, kernel: int,
                 rng: np.random.Generator, dtype: np.dtype):
        self.c1 = ConvBNAct(in_channels, post_channels, kernel, rng, dtype)
        self.c2 = ConvBNAct(post_channels, post_channels, kernel, rng, dtype)
        self.out_channels = post_channels

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        return self.c2.forward(self.c1.forward(x, train), train)

    def backward(self, g: np.ndarray) -> np.ndarray:
        return self.c1.backward(self.c2.backward(g))

    def named_children(self):
        return [("c1", self.c1), ("c2", self.c2)]


def collect_named(prefix: str, layer) -> list[tuple[str, object]]:
    """Flatten a layer tree into (path, leaf-layer) pairs."""
    if hasattr(layer, "named_children"):
        out = []
        for name, child in layer.named_children():
            out.extend(collect_named(f"{prefix}.{name}" if prefix else name, child))
        return out
    return [(prefix, layer)]


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and loss settings for one-image-at-a-time training."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 1
    loss_domain: str = "bmode"  # or "rf": MSE on pre-envelope sums

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")
        if self.batch_size != 1:
            raise ConfigurationError("batch size is fixed to 1")
        if self.loss_domain not in ("bmode", "rf"):
            raise ConfigurationError("loss_domain must be 'bmode' or 'rf'")

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "beta1": self.beta1,
                "beta2": self.beta2, "adam_eps": self.adam_eps,
                "batch_size": self.batch_size, "loss_domain": self.loss_domain}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


class Adam:
    """Adam with bias correction; state is keyed by parameter name."""

    def __init__(self, cfg: TrainConfig = TrainConfig()):
        self.cfg = cfg
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, named_params: list[tuple[str, np.ndarray]],
             named_grads: dict[str, np.ndarray]) -> None:
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1 ** self.t
        bc2 = 1.0 - c.beta2 ** self.t
        for name, p in named_params:
            g = named_grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            p -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)
