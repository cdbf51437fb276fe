"""Per-pixel plane-wave delays and resampling into the compensated data cube."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError
from .sim import ProbeConfig, RFFrame


@dataclass(frozen=True)
class ImageGrid:
    """Rectangular pixel grid; lateral span is aligned to the element aperture.

    depth_px (m) and lateral_px (n) must each be divisible by 8 so the image
    survives three 2x downsamplings. Keep the depth step below a quarter of
    the two-way period at the center frequency — equivalently, half the
    period of the second-harmonic band the multiply-and-sum path emits — or
    the envelope stage, which runs along the depth axis, will alias.
    """

    depth_px: int
    lateral_px: int
    z_min: float
    z_max: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.depth_px <= 0 or self.lateral_px <= 0:
            raise ConfigurationError("grid must have positive pixel counts")
        if self.depth_px % 8 or self.lateral_px % 8:
            raise ConfigurationError(
                "depth_px and lateral_px must be divisible by 8")
        if not (0 <= self.z_min < self.z_max):
            raise ConfigurationError("need 0 <= z_min < z_max")
        if self.x_min >= self.x_max:
            raise ConfigurationError("need x_min < x_max")

    @classmethod
    def for_probe(cls, probe: ProbeConfig, depth_px: int = 256,
                  lateral_px: int = 64, z_min: float = 17e-3,
                  z_max: float = 23e-3) -> "ImageGrid":
        ex = probe.element_positions
        return cls(depth_px=depth_px, lateral_px=lateral_px,
                   z_min=z_min, z_max=z_max,
                   x_min=float(ex[0]), x_max=float(ex[-1]))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.depth_px, self.lateral_px)

    @property
    def z_positions(self) -> np.ndarray:
        return np.linspace(self.z_min, self.z_max, self.depth_px)

    @property
    def x_positions(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.lateral_px)

    @property
    def dz(self) -> float:
        return (self.z_max - self.z_min) / (self.depth_px - 1)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.lateral_px - 1)

    def to_dict(self) -> dict:
        return {"depth_px": self.depth_px, "lateral_px": self.lateral_px,
                "z_min": self.z_min, "z_max": self.z_max,
                "x_min": self.x_min, "x_max": self.x_max}

    @classmethod
    def from_dict(cls, d: dict) -> "ImageGrid":
        return cls(**d)


@dataclass
class DelayedTensor:
    """Delay-compensated cube of shape (depth, lateral, channel)."""

    data: np.ndarray
    grid: ImageGrid
    probe: ProbeConfig

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        expect = (self.grid.depth_px, self.grid.lateral_px, self.probe.num_channels)
        if self.data.shape != expect:
            raise ConfigurationError(
                f"delayed tensor must be {expect}, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ConfigurationError("delayed tensor must be finite")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def compute_delay(x, z, element_x, c: float):
    """Two-way travel time for a 0-degree plane wave.

    Transmit leg is the depth z, receive leg the euclidean pixel-to-element
    distance; accepts scalars or broadcastable arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    element_x = np.asarray(element_x, dtype=np.float64)
    return (z + np.hypot(x - element_x, z)) / c


def delay_compensate(frame: RFFrame, grid: ImageGrid) -> DelayedTensor:
    """Resample every channel at each pixel's round-trip delay.

    Linear interpolation between RF samples; delays falling outside the
    recorded window contribute exactly 0.
    """
    probe = frame.probe
    ex = probe.element_positions
    if not (np.isclose(grid.x_min, ex[0]) and np.isclose(grid.x_max, ex[-1])):
        raise ConfigurationError(
            "grid lateral span does not match the probe aperture")

    z = grid.z_positions
    x = grid.x_positions
    lat = x[:, None] - ex[None, :]                      # (n, N)
    rx = np.sqrt(lat[None, :, :] ** 2 + (z ** 2)[:, None, None])
    tau = (z[:, None, None] + rx) / probe.speed_of_sound

    fs = probe.sampling_frequency
    pos = (tau - frame.t0) * fs
    n_t = frame.num_samples
    valid = (pos >= 0.0) & (pos <= n_t - 1)
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, n_t - 2)
    frac = pos - i0

    data = np.empty(pos.shape, dtype=np.float64)
    for ch in range(probe.num_channels):
        line = frame.samples[:, ch]
        a = line[i0[:, :, ch]]
        b = line[i0[:, :, ch] + 1]
        data[:, :, ch] = a + frac[:, :, ch] * (b - a)
    data[~valid] = 0.0

    return DelayedTensor(data=data, grid=grid, probe=probe)
