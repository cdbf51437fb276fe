"""Reference beamformers: DAS, F-DMAS, MVDR and GCF.

Each maps a delay-compensated cube (depth, lateral, channel) to a pre-envelope
image (depth, lateral). All four are pure per-pixel (or per-line) maps and are
safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import firwin

from .exceptions import ConfigurationError
from .geometry import DelayedTensor


class Method(str, Enum):
    DAS = "das"
    FDMAS = "fdmas"
    MVDR = "mvdr"
    GCF = "gcf"
    MODEL = "model"


@dataclass
class BeamformedData:
    """Pre-envelope beamformed image with its originating method."""

    values: np.ndarray
    method_tag: Method
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ConfigurationError("beamformed data must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("beamformed data must be finite")


@dataclass(frozen=True)
class MvdrConfig:
    """Spatial-smoothing MVDR parameters.

    subaperture_len of 0 means "half the channel count", resolved per tensor.
    """

    subaperture_len: int = 0
    diagonal_loading_eps: float = 0.01
    averaging_depth_samples: int = 1

    def __post_init__(self):
        if self.diagonal_loading_eps <= 0:
            raise ConfigurationError("diagonal loading must be > 0")
        if self.subaperture_len < 0 or self.averaging_depth_samples < 0:
            raise ConfigurationError("MVDR lengths must be >= 0")

    def resolve_length(self, num_channels: int) -> int:
        length = self.subaperture_len or num_channels // 2
        if not 1 <= length <= num_channels:
            raise ConfigurationError(
                f"subaperture length {length} invalid for {num_channels} channels")
        return length

    def to_dict(self) -> dict:
        return {"subaperture_len": self.subaperture_len,
                "diagonal_loading_eps": self.diagonal_loading_eps,
                "averaging_depth_samples": self.averaging_depth_samples}

    @classmethod
    def from_dict(cls, d: dict) -> "MvdrConfig":
        return cls(**d)


@dataclass(frozen=True)
class GcfConfig:
    """Low-frequency cutoff (in aperture DFT bins) for the coherence factor."""

    low_freq_cutoff: int = 1

    def __post_init__(self):
        if self.low_freq_cutoff < 0:
            raise ConfigurationError("low_freq_cutoff must be >= 0")

    def validate_for(self, num_channels: int) -> None:
        if self.low_freq_cutoff >= num_channels / 2:
            raise ConfigurationError(
                f"low_freq_cutoff must be < N_ch/2 = {num_channels / 2}")

    def to_dict(self) -> dict:
        return {"low_freq_cutoff": self.low_freq_cutoff}

    @classmethod
    def from_dict(cls, d: dict) -> "GcfConfig":
        return cls(**d)


def das(t: DelayedTensor, apod: np.ndarray | None = None) -> BeamformedData:
    """Apodized channel sum; ``apod=None`` means uniform all-ones weights."""
    x = t.data
    if apod is None:
        values = x.sum(axis=2)
    else:
        apod = np.asarray(apod, dtype=np.float64)
        if apod.shape != x.shape:
            raise ConfigurationError(
                f"apodization shape {apod.shape} != tensor shape {x.shape}")
        values = np.einsum("mnc,mnc->mn", apod, x)
    return BeamformedData(values=values, method_tag=Method.DAS)


def fdmas_pair_sum(t: DelayedTensor) -> np.ndarray:
    """Signed-square-root pairwise product sum, before bandpass filtering.

    y = sum_{i<j} sign(s_i s_j) sqrt(|s_i s_j|), computed through the identity
    y = ((sum_i r_i)^2 - sum_i r_i^2) / 2 with r_i = sign(s_i) sqrt(|s_i|).
    """
    if t.probe.num_channels < 2:
        raise ConfigurationError("F-DMAS needs at least 2 channels")
    r = np.sign(t.data) * np.sqrt(np.abs(t.data))
    total = r.sum(axis=2)
    return 0.5 * (total ** 2 - np.abs(t.data).sum(axis=2))


def fdmas_filter_taps(probe, numtaps: int = 63) -> np.ndarray:
    """Linear-phase FIR isolating the pair-product band near 2*fc.

    Hamming-windowed design with passband [1.5*fc, 2.5*fc]. At sampling
    rates below 5.43*fc the nominal upper edge would sit in the transition
    region at Nyquist (at the minimum rate fs = 4*fc, the harmonic center
    2*fc IS Nyquist), so the design degrades to a highpass at 1.5*fc —
    the same band with its upper edge left open.
    """
    fc = probe.center_frequency
    fs = probe.sampling_frequency
    if fs < 4.0 * fc:
        raise ConfigurationError(
            "F-DMAS needs fs >= 4*fc so the 2*fc band is representable")
    low = 1.5 * fc
    high = 2.5 * fc
    # Keep a transition band's worth of room (~3.3*fs/numtaps for Hamming)
    # below Nyquist, otherwise drop the upper edge entirely.
    if high < fs / 2.0 - 3.3 * fs / numtaps:
        return firwin(numtaps, [low, high], pass_zero=False,
                      window="hamming", fs=fs)
    return firwin(numtaps, low, pass_zero=False, window="hamming", fs=fs)


def fdmas(t: DelayedTensor, numtaps: int = 63) -> BeamformedData:
    """Filtered delay-multiply-and-sum.

    Pairwise signed-square-root products are summed per pixel, then every
    lateral line is bandpass filtered along depth around the 2*fc harmonic
    (zero-phase centered convolution, zero padded at the ends).
    """
    taps = fdmas_filter_taps(t.probe, numtaps=numtaps)
    pre = fdmas_pair_sum(t)
    values = np.empty_like(pre)
    half = (len(taps) - 1) // 2
    m = pre.shape[0]
    for q in range(pre.shape[1]):
        # Centered slice of the full convolution; unlike mode="same" this
        # stays aligned when the depth line is shorter than the filter.
        values[:, q] = np.convolve(pre[:, q], taps)[half:half + m]
    return BeamformedData(values=values, method_tag=Method.FDMAS)


def mvdr_weights(R: np.ndarray, eps: float) -> np.ndarray:
    """Distortionless weights for one (or a batch of) covariance matrices.

    Applies diagonal loading eps*trace(R)/L and solves R' w = 1, normalized so
    that sum(w) = 1. Batches broadcast over leading axes.
    """
    R = np.asarray(R, dtype=np.float64)
    L = R.shape[-1]
    tr = np.trace(R, axis1=-2, axis2=-1)
    loading = eps * tr / L
    eye = np.eye(L)
    Rp = R + loading[..., None, None] * eye
    degenerate = ~(tr > 0)
    if np.any(degenerate):
        Rp = np.where(degenerate[..., None, None], eye, Rp)
    a = np.ones(R.shape[:-2] + (L, 1))
    w = np.linalg.solve(Rp, a)[..., 0]
    denom = w.sum(axis=-1)
    bad = degenerate | ~np.isfinite(denom) | (np.abs(denom) < np.finfo(np.float64).tiny)
    safe = np.where(bad, 1.0, denom)
    w = w / safe[..., None]
    if np.any(bad):
        w = np.where(bad[..., None], 1.0 / L, w)
    return w


def mvdr(t: DelayedTensor, cfg: MvdrConfig | None = None) -> BeamformedData:
    """Minimum-variance beamformer with spatial smoothing and depth averaging.

    Per pixel, the covariance is averaged over length-L sliding subapertures
    (and optionally over neighboring depth samples), diagonally loaded, and the
    distortionless weights are applied to the mean subaperture snapshot.
    All-zero pixels fall back to uniform 1/L weights and are flagged in the
    diagnostics.
    """
    cfg = cfg or MvdrConfig()
    x = t.data
    m, n, N = x.shape
    L = cfg.resolve_length(N)
    K = N - L + 1

    snaps = sliding_window_view(x, L, axis=2)           # (m, n, K, L)
    R = np.einsum("mnkl,mnkp->mnlp", snaps, snaps) / K  # (m, n, L, L)

    avg = cfg.averaging_depth_samples
    if avg > 0:
        # Moving average over depth via padded cumulative sum.
        csum = np.cumsum(R, axis=0)
        padded = np.concatenate([np.zeros_like(R[:1]), csum], axis=0)
        hi = np.minimum(np.arange(m) + avg + 1, m)
        lo = np.maximum(np.arange(m) - avg, 0)
        R = (padded[hi] - padded[lo]) / (hi - lo)[:, None, None, None]

    w = mvdr_weights(R, cfg.diagonal_loading_eps)       # (m, n, L)
    mean_snap = snaps.mean(axis=2)
    values = np.einsum("mnl,mnl->mn", w, mean_snap)

    zero_pixels = ~(np.abs(x).sum(axis=2) > 0)
    values[zero_pixels] = 0.0
    diagnostics = {"uniform_fallback_pixels": int(zero_pixels.sum()),
                   "subaperture_len": L}
    return BeamformedData(values=values, method_tag=Method.MVDR,
                          diagnostics=diagnostics)


def gcf_map(t: DelayedTensor, cfg: GcfConfig | None = None) -> np.ndarray:
    """Per-pixel generalized coherence factor in [0, 1].

    Ratio of aperture-spectrum energy within ``low_freq_cutoff`` bins of DC to
    the total spectral energy; zero-energy pixels get 0.
    """
    cfg = cfg or GcfConfig()
    N = t.probe.num_channels
    cfg.validate_for(N)
    spectrum = np.fft.fft(t.data, axis=2)
    power = np.abs(spectrum) ** 2
    m0 = cfg.low_freq_cutoff
    bins = list(range(0, m0 + 1)) + [N - k for k in range(1, m0 + 1)]
    low = power[:, :, sorted(set(b % N for b in bins))].sum(axis=2)
    total = power.sum(axis=2)
    out = np.zeros(low.shape, dtype=np.float64)
    np.divide(low, total, out=out, where=total > 0)
    return np.clip(out, 0.0, 1.0)


def gcf(t: DelayedTensor, cfg: GcfConfig | None = None) -> BeamformedData:
    """Uniform DAS weighted per pixel by the generalized coherence factor."""
    factor = gcf_map(t, cfg)
    values = factor * t.data.sum(axis=2)
    return BeamformedData(values=values, method_tag=Method.GCF)
