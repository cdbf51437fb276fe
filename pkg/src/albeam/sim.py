"""Synthetic plane-wave RF data from declarative phantom descriptions.

A phantom is a collection of point scatterers: explicit point targets plus a
seeded diffuse speckle field whose reflectivity is modulated by cyst regions.
A single 0-degree plane-wave transmit is modeled; each scatterer returns a
gaussian-windowed tone burst delayed by the two-way travel time and attenuated
by spherical spreading.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .exceptions import ConfigurationError, OutOfWindowError

# Half-amplitude (-6 dB) width of a gaussian envelope in units of sigma.
_FWHM_SIGMAS = 2.0 * np.sqrt(2.0 * np.log(2.0))


@dataclass(frozen=True)
class ProbeConfig:
    """Linear-array probe description for 0-degree plane-wave transmit.

    Element x-positions are centered on the array: ``x_i = (i - (N-1)/2) * pitch``.
    """

    num_channels: int = 16
    pitch: float = 0.3e-3
    center_frequency: float = 5.0e6
    sampling_frequency: float = 20.0e6
    speed_of_sound: float = 1540.0
    pulse_cycles: float = 2.5

    def __post_init__(self):
        if self.num_channels < 2:
            raise ConfigurationError("probe needs at least 2 channels")
        if self.sampling_frequency < 4.0 * self.center_frequency:
            raise ConfigurationError(
                "sampling_frequency must be >= 4x center_frequency so the "
                "pair-product band at 2*fc stays representable"
            )
        if min(self.pitch, self.center_frequency, self.speed_of_sound,
               self.pulse_cycles) <= 0:
            raise ConfigurationError("probe parameters must be positive")

    @property
    def element_positions(self) -> np.ndarray:
        idx = np.arange(self.num_channels, dtype=np.float64)
        return (idx - (self.num_channels - 1) / 2.0) * self.pitch

    @property
    def aperture(self) -> float:
        return (self.num_channels - 1) * self.pitch

    def to_dict(self) -> dict:
        return {
            "num_channels": self.num_channels,
            "pitch": self.pitch,
            "center_frequency": self.center_frequency,
            "sampling_frequency": self.sampling_frequency,
            "speed_of_sound": self.speed_of_sound,
            "pulse_cycles": self.pulse_cycles,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeConfig":
        return cls(**d)


def desk_probe(**overrides) -> ProbeConfig:
    """Default 16-channel desk-scale probe (5 MHz, fs = 4*fc)."""
    return ProbeConfig(**overrides)


def paper_scale_probe(**overrides) -> ProbeConfig:
    """128-channel linear array at 7.6 MHz center frequency."""
    base = dict(num_channels=128, pitch=0.3e-3, center_frequency=7.6e6,
                sampling_frequency=30.4e6)
    base.update(overrides)
    return ProbeConfig(**base)


@dataclass(frozen=True)
class PhantomSpec:
    """Declarative scatterer field.

    point_targets: tuple of (x, z, amplitude) in meters / dimensionless.
    cyst_regions: tuple of ((cx, cz), radius, echogenicity); echogenicity
        scales the diffuse reflectivity of speckle scatterers inside the cyst
        (0 = anechoic).
    speckle_density: diffuse scatterers per mm^2 of insonified area.
    """

    point_targets: tuple = ()
    cyst_regions: tuple = ()
    speckle_density: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for x, z, amp in self.point_targets:
            if z <= 0:
                raise ConfigurationError(f"point target depth must be > 0, got {z}")
            if amp < 0:
                raise ConfigurationError("point target amplitude must be >= 0")
        for (cx, cz), radius, echo in self.cyst_regions:
            if cz <= 0 or radius <= 0:
                raise ConfigurationError("cyst center depth and radius must be > 0")
            if echo < 0:
                raise ConfigurationError("cyst echogenicity must be >= 0")
        if self.speckle_density < 0:
            raise ConfigurationError("speckle_density must be >= 0")

    def is_empty(self) -> bool:
        return not self.point_targets and self.speckle_density == 0.0

    def to_dict(self) -> dict:
        return {
            "point_targets": [list(p) for p in self.point_targets],
            "cyst_regions": [[list(c), r, e] for c, r, e in self.cyst_regions],
            "speckle_density": self.speckle_density,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhantomSpec":
        return cls(
            point_targets=tuple((float(x), float(z), float(a))
                                for x, z, a in d.get("point_targets", [])),
            cyst_regions=tuple(((float(c[0]), float(c[1])), float(r), float(e))
                               for c, r, e in d.get("cyst_regions", [])),
            speckle_density=float(d.get("speckle_density", 0.0)),
            rng_seed=int(d.get("rng_seed", 0)),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RFFrame:
    """Raw per-channel time series from one plane-wave transmit.

    samples has shape (time, channel); t0 is the receive time of sample 0.
    """

    samples: np.ndarray
    t0: float
    probe: ProbeConfig
    provenance: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[1] != self.probe.num_channels:
            raise ConfigurationError(
                f"samples must be (time, {self.probe.num_channels}), "
                f"got {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigurationError("RF samples must be finite")

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.samples.tobytes())
        h.update(np.float64(self.t0).tobytes())
        h.update(json.dumps(self.probe.to_dict(), sort_keys=True).encode())
        return h.hexdigest()


def transmit_pulse(probe: ProbeConfig, t: np.ndarray) -> np.ndarray:
    """Gaussian-windowed tone burst centered at t = 0.

    The envelope's -6 dB (half-amplitude) duration spans ``pulse_cycles``
    periods of the center frequency.
    """
    fwhm = probe.pulse_cycles / probe.center_frequency
    sigma = fwhm / _FWHM_SIGMAS
    return np.exp(-0.5 * (t / sigma) ** 2) * np.cos(2.0 * np.pi * probe.center_frequency * t)


def pulse_sigma(probe: ProbeConfig) -> float:
    return probe.pulse_cycles / probe.center_frequency / _FWHM_SIGMAS


def _gather_scatterers(phantom: PhantomSpec, probe: ProbeConfig, max_depth: float,
                       min_depth: float = 1.5e-3):
    """Expand a PhantomSpec into flat (x, z, amplitude) arrays."""
    xs, zs, amps = [], [], []
    for x, z, a in phantom.point_targets:
        xs.append(x)
        zs.append(z)
        amps.append(a)

    if phantom.speckle_density > 0 and max_depth > min_depth:
        rng = np.random.default_rng(phantom.rng_seed)
        half = probe.aperture / 2.0
        width_mm = 2.0 * half * 1e3
        height_mm = (max_depth - min_depth) * 1e3
        count = int(round(phantom.speckle_density * width_mm * height_mm))
        sx = rng.uniform(-half, half, size=count)
        sz = rng.uniform(min_depth, max_depth, size=count)
        sa = rng.standard_normal(count)
        for (cx, cz), radius, echo in phantom.cyst_regions:
            inside = (sx - cx) ** 2 + (sz - cz) ** 2 <= radius ** 2
            sa[inside] *= echo
        xs.extend(sx)
        zs.extend(sz)
        amps.extend(sa)

    return (np.asarray(xs, dtype=np.float64),
            np.asarray(zs, dtype=np.float64),
            np.asarray(amps, dtype=np.float64))


def synthesize_frame(phantom: PhantomSpec, probe: ProbeConfig,
                     max_depth: float = 0.04) -> RFFrame:
    """Simulate one 0-degree plane-wave acquisition of the phantom.

    Each scatterer at (x, z) contributes to element i an echo of the transmit
    pulse arriving at t = (z + sqrt((x - x_i)^2 + z^2)) / c, scaled by its
    amplitude and by 1/sqrt(round-trip distance). Contributions add linearly
    and the result is bit-deterministic for a given (phantom, probe, seed).

    Raises OutOfWindowError for scatterers deeper than ``max_depth``.
    """
    c = probe.speed_of_sound
    fs = probe.sampling_frequency
    elem_x = probe.element_positions
    sigma = pulse_sigma(probe)
    tail = 4.0 * sigma

    xs, zs, amps = _gather_scatterers(phantom, probe, max_depth)
    if zs.size and float(zs.max()) > max_depth:
        deepest = float(zs.max())
        raise OutOfWindowError(
            f"scatterer at z={deepest * 1e3:.2f} mm exceeds the "
            f"{max_depth * 1e3:.2f} mm window")

    # Window: farthest two-way path at the worst lateral offset, plus pulse tail.
    worst = max_depth + np.hypot(max_depth, probe.aperture)
    t_end = worst / c + tail
    n_samples = int(np.ceil(t_end * fs)) + 1
    samples = np.zeros((n_samples, probe.num_channels), dtype=np.float64)

    for x, z, a in zip(xs, zs, amps):
        if a == 0.0:
            continue
        path = z + np.hypot(x - elem_x, z)  # per-element round trip, (N,)
        t_arr = path / c
        gain = a / np.sqrt(path)
        for i in range(probe.num_channels):
            lo = int(np.floor((t_arr[i] - tail) * fs))
            hi = int(np.ceil((t_arr[i] + tail) * fs)) + 1
            lo = max(lo, 0)
            hi = min(hi, n_samples)
            if lo >= hi:
                continue
            t_local = np.arange(lo, hi, dtype=np.float64) / fs - t_arr[i]
            samples[lo:hi, i] += gain[i] * transmit_pulse(probe, t_local)

    return RFFrame(samples=samples, t0=0.0, probe=probe,
                   provenance=phantom.digest())


def load_phantom_file(path) -> tuple[PhantomSpec, dict]:
    """Read a phantom description from a YAML file.

    Returns the phantom plus any extra simulation options found under
    the optional ``sim`` key (e.g. ``max_depth``, in meters).
    """
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    sim_opts = doc.pop("sim", {}) or {}
    spec = PhantomSpec.from_dict(doc)
    return spec, sim_opts


def save_phantom_file(path, phantom: PhantomSpec, sim_opts: dict | None = None) -> None:
    doc = phantom.to_dict()
    if sim_opts:
        doc["sim"] = dict(sim_opts)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)
