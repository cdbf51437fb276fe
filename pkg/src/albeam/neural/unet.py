"""Encoder-decoder network mapping channel tensors to channel tensors.

The input is a per-pixel channel stack (one channel per receive element at
that pixel's delay); the output has the same shape and feeds the beamforming
head. Three pooling levels, skip connections by channel concatenation, and a
final 1x1 projection with no normalization or activation.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigurationError
from .engine import (Conv2d, ConvBNAct, DoubleConv, MaxPool2x2,
                     UpsampleNearest2x, collect_named)


@dataclass(frozen=True)
class UNetConfig:
    """Architecture hyperparameters; the digest pins them in checkpoints."""

    in_channels: int
    stem_channels: int
    out_channels: int
    depth_levels: int = 3
    kernel: int = 3
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if self.in_channels < 1 or self.out_channels < 1:
            raise ConfigurationError("channel counts must be >= 1")
        if self.stem_channels < 2 or self.stem_channels % 2:
            raise ConfigurationError("stem_channels must be an even number >= 2")
        if self.depth_levels < 1:
            raise ConfigurationError("depth_levels must be >= 1")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ConfigurationError("kernel must be odd and positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError("dtype must be float32 or float64")

    def to_dict(self) -> dict:
        return {"in_channels": self.in_channels,
                "stem_channels": self.stem_channels,
                "out_channels": self.out_channels,
                "depth_levels": self.depth_levels,
                "kernel": self.kernel,
                "dtype": self.dtype,
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "UNetConfig":
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def desk_unet_config(num_channels: int = 16, **overrides) -> UNetConfig:
    """Small configuration sized for a 16-element aperture."""
    base = {"in_channels": num_channels, "stem_channels": 16,
            "out_channels": num_channels}
    base.update(overrides)
    return UNetConfig(**base)


def full_unet_config(num_channels: int = 128, **overrides) -> UNetConfig:
    """Full-size configuration for a 128-element aperture (64-wide stem)."""
    base = {"in_channels": num_channels, "stem_channels": 64,
            "out_channels": num_channels}
    base.update(overrides)
    return UNetConfig(**base)


class UNet:
    def __init__(self, cfg: UNetConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        dt = np.dtype(cfg.dtype)
        s = cfg.stem_channels
        k = cfg.kernel
        d = cfg.depth_levels

        self.stem = DoubleConv(cfg.in_channels, s, k, rng, dt)
        self.pools = [MaxPool2x2(s * 2 ** i) for i in range(d)]
        self.down = [DoubleConv(s * 2 ** i, s * 2 ** (i + 1), k, rng, dt)
                     for i in range(d)]
        # Decoder level i consumes width s*2**(i+1) from below and emits s*2**i.
        self.ups = [UpsampleNearest2x(s * 2 ** (i + 1))
                    for i in reversed(range(d))]
        self.up_proj = [ConvBNAct(s * 2 ** (i + 1), s * 2 ** i, 1, rng, dt)
                        for i in reversed(range(d))]
        self.up_conv = [DoubleConv(s * 2 ** (i + 1), s * 2 ** i, k, rng, dt)
                        for i in reversed(range(d))]
        self.final = Conv2d(s, cfg.out_channels, 1, rng, dt)
        self._skip_widths: list[int] = []

    def named_modules(self) -> list[tuple[str, object]]:
        mods: list[tuple[str, object]] = [("stem", self.stem)]
        for i, m in enumerate(self.down):
            mods.append((f"down{i}", m))
        for i, (proj, conv) in enumerate(zip(self.up_proj, self.up_conv)):
            mods.append((f"up{i}.proj", proj))
            mods.append((f"up{i}.conv", conv))
        mods.append(("final", self.final))
        return mods

    def named_leaves(self) -> list[tuple[str, object]]:
        leaves = []
        for name, mod in self.named_modules():
            leaves.extend(collect_named(name, mod))
        return leaves

    def named_params(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for path, leaf in self.named_leaves():
            for pname, arr in leaf.param_items():
                out.append((f"{path}.{pname}", arr))
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {}
        for path, leaf in self.named_leaves():
            for pname, arr in leaf.grad_items():
                out[f"{path}.{pname}"] = arr
        return out

    def named_state(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for path, leaf in self.named_leaves():
            for sname, arr in leaf.state_items():
                out.append((f"{path}.{sname}", arr))
        return out

    def zero_grads(self) -> None:
        for g in self.named_grads().values():
            g[...] = 0.0

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        cfg = self.cfg
        if x.ndim != 3 or x.shape[0] != cfg.in_channels:
            raise ConfigurationError(
                f"expected ({cfg.in_channels}, H, W) input, got {x.shape}")
        stride = 2 ** cfg.depth_levels
        if x.shape[1] % stride or x.shape[2] % stride:
            raise ConfigurationError(
                f"H and W must be divisible by {stride}, got {x.shape[1:]}")
        x = np.ascontiguousarray(x, dtype=np.dtype(cfg.dtype))

        skips = []
        h = self.stem.forward(x, train)
        for pool, down in zip(self.pools, self.down):
            skips.append(h)
            h = down.forward(pool.forward(h, train), train)

        self._skip_widths = []
        for up, proj, conv in zip(self.ups, self.up_proj, self.up_conv):
            skip = skips.pop()
            h = proj.forward(up.forward(h, train), train)
            self._skip_widths.append(h.shape[0])
            h = conv.forward(np.concatenate([h, skip], axis=0), train)
        return self.final.forward(h, train)

    def backward(self, g: np.ndarray) -> np.ndarray:
        """Backpropagate, accumulating parameter grads; returns d(input)."""
        g = self.final.backward(g)
        skip_grads = []
        for conv, proj, up, width in zip(reversed(self.up_conv),
                                         reversed(self.up_proj),
                                         reversed(self.ups),
                                         reversed(self._skip_widths)):
            g = conv.backward(g)
            skip_grads.append(g[width:])
            g = up.backward(proj.backward(g[:width]))
        # skip_grads was filled shallowest-first; the encoder unwinds deepest-first.
        for down, pool in zip(reversed(self.down), reversed(self.pools)):
            g = pool.backward(down.backward(g))
            g = g + skip_grads.pop()
        return self.stem.backward(g)

    def num_params(self) -> int:
        return sum(int(arr.size) for _, arr in self.named_params())
