"""Differentiable pipeline from weighted channel sums to a normalized image.

Forward: multiply the delayed channel tensor by per-pixel weights, sum over
channels, take the envelope (Hilbert along depth), log-compress against the
image peak and rescale to [0, 1]. Training replaces the hard floor clip with
a C1 soft clamp so gradients flow through dark pixels; evaluation applies the
hard clip and exactly matches the display pipeline.

All pieces are real-linear or smooth, so the whole chain supports a
hand-derived backward pass. The Hilbert imaginary part is a fixed linear
operator whose adjoint is its negation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert

from ..beamformers import BeamformedData, Method
from ..exceptions import ConfigurationError, TrainingAbortedError
from ..geometry import DelayedTensor
from ..postprocess import DEFAULT_DYNAMIC_RANGE, BModeImage, envelope, log_compress
from .engine import Adam, TrainConfig
from .unet import UNet

# Pixels this far below the displayed range still get a finite dB value so
# log gradients stay bounded.
FLOOR_MARGIN_DB = 20.0
# Soft-clamp knee as a fraction of the normalized range.
SOFT_KNEE = 0.05


@dataclass
class ApodWeights:
    """Per-pixel, per-channel beamforming weights (depth, lateral, channels).

    Values are unconstrained in sign.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 3:
            raise ConfigurationError(f"weights must be 3-D, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ConfigurationError("weights must be finite")
        self.weights = w

    @property
    def shape(self) -> tuple:
        return self.weights.shape


def _as_weights(w) -> np.ndarray:
    return w.weights if isinstance(w, ApodWeights) else np.asarray(w, dtype=np.float64)


def _hilbert_imag(y: np.ndarray) -> np.ndarray:
    """Imaginary part of the analytic signal along axis 0."""
    return hilbert(y, axis=0).imag


def weighted_channel_sum(t: DelayedTensor, w) -> BeamformedData:
    """y[p,q] = sum_i w[p,q,i] * t[p,q,i]."""
    wa = _as_weights(w)
    if wa.shape != t.data.shape:
        raise ConfigurationError(
            f"weight shape {wa.shape} != tensor shape {t.data.shape}")
    return BeamformedData(values=np.einsum("mnc,mnc->mn", wa, t.data),
                          method_tag=Method.MODEL)


def _soft_clamp(u: np.ndarray, knee: float = SOFT_KNEE):
    """Identity above the knee; tanh-saturating (0, knee] below it. C1."""
    low = u < knee
    z = (u - knee) / knee
    out = np.where(low, knee + knee * np.tanh(z), u)
    # d(out)/du: 1 above the knee, sech^2(z) below.
    dout = np.where(low, 1.0 / np.cosh(z) ** 2, 1.0)
    return out, dout


def head_forward(t: DelayedTensor, w,
                 dynamic_range: float = DEFAULT_DYNAMIC_RANGE,
                 train: bool = True):
    """Normalized [0,1] image plus the cache the backward pass needs."""
    wa = _as_weights(w)
    y = np.einsum("mnc,mnc->mn", wa, t.data)
    h = _hilbert_imag(y)
    e = np.sqrt(y * y + h * h)
    peak = float(e.max())
    if peak <= 0.0:
        u = np.zeros_like(e)
        return u, {"degenerate": True, "shape": e.shape, "t": t, "w": wa}
    floor_gain = 10.0 ** (-(dynamic_range + FLOOR_MARGIN_DB) / 20.0)
    floor = peak * floor_gain
    floored = e <= floor
    e_safe = np.maximum(e, floor)
    db = 20.0 * np.log10(e_safe / peak)
    u_raw = (db + dynamic_range) / dynamic_range
    if train:
        u, du = _soft_clamp(u_raw)
    else:
        u = np.clip(u_raw, 0.0, 1.0)
        du = None
    cache = {"degenerate": False, "t": t, "w": wa, "y": y, "h": h, "e": e,
             "peak": peak, "floor_gain": floor_gain, "floored": floored,
             "e_safe": e_safe, "du": du, "dr": dynamic_range,
             "argmax": np.unravel_index(int(e.argmax()), e.shape)}
    return u, cache


def head_backward(cache: dict, gu: np.ndarray):
    """Gradients of a scalar loss w.r.t. the weights and the channel tensor."""
    if cache["degenerate"]:
        z = np.zeros(cache["shape"] + (cache["t"].data.shape[2],))
        return z, z.copy()
    t, wa = cache["t"], cache["w"]
    e, e_safe, peak = cache["e"], cache["e_safe"], cache["peak"]
    du, dr = cache["du"], cache["dr"]
    scale = 20.0 / np.log(10.0)

    gdb = (gu * du) / dr
    ge_safe = gdb * scale / e_safe
    # d(db)/d(peak) through the normalization denominator.
    dpeak = -scale * float(gdb.sum()) / peak
    floored = cache["floored"]
    ge = np.where(floored, 0.0, ge_safe)
    # Floored pixels ride the floor, which itself scales with the peak.
    dpeak += cache["floor_gain"] * float(ge_safe[floored].sum())
    ge[cache["argmax"]] += dpeak

    with np.errstate(invalid="ignore", divide="ignore"):
        gy = np.where(e > 0, ge * cache["y"] / e, 0.0)
        gh = np.where(e > 0, ge * cache["h"] / e, 0.0)
    gy = gy - _hilbert_imag(gh)  # adjoint of the Hilbert imaginary part
    gw = gy[:, :, None] * t.data
    gt = gy[:, :, None] * wa
    return gw, gt


def beamform_head(t: DelayedTensor, w,
                  dynamic_range: float = DEFAULT_DYNAMIC_RANGE) -> BModeImage:
    """Evaluation-mode rendering: identical to the display pipeline."""
    y = weighted_channel_sum(t, w)
    return log_compress(envelope(y), dynamic_range, method_tag=Method.MODEL)


def mse_loss(u: np.ndarray, target_u: np.ndarray):
    if u.shape != target_u.shape:
        raise ConfigurationError(
            f"prediction shape {u.shape} != target shape {target_u.shape}")
    diff = u - target_u
    loss = float(np.mean(diff * diff))
    gu = (2.0 / diff.size) * diff
    return loss, gu


def model_weights(t: DelayedTensor, model: UNet, train: bool = False) -> ApodWeights:
    """Run the network on a channel tensor; channels-first inside, (m,n,c) outside."""
    x = np.transpose(t.data, (2, 0, 1))
    out = model.forward(x, train=train)
    return ApodWeights(weights=np.transpose(out, (1, 2, 0)))


@dataclass(frozen=True)
class StepResult:
    loss: float
    step: int
    grad_norm: float


def train_step(t: DelayedTensor, target, model: UNet, opt: Adam,
               cfg: TrainConfig = TrainConfig(),
               dynamic_range: float = DEFAULT_DYNAMIC_RANGE) -> StepResult:
    """One forward/backward/Adam update against a single target image.

    A non-finite loss or gradient aborts before any parameter is touched.
    """
    x = np.transpose(t.data, (2, 0, 1))
    w_chw = model.forward(x, train=True)
    w = np.transpose(w_chw, (1, 2, 0))

    if cfg.loss_domain == "rf":
        if not isinstance(target, BeamformedData):
            raise ConfigurationError(
                "rf loss domain needs a pre-envelope BeamformedData target")
        y = np.einsum("mnc,mnc->mn", w, t.data)
        scale = float(np.abs(target.values).max()) or 1.0
        loss, gp = mse_loss(y / scale, target.values / scale)
        gw = (gp / scale)[:, :, None] * t.data
    else:
        if not isinstance(target, BModeImage):
            raise ConfigurationError("bmode loss domain needs a BModeImage target")
        u, cache = head_forward(t, w, dynamic_range, train=True)
        loss, gu = mse_loss(u, target.normalized())
        gw, _ = head_backward(cache, gu)

    if not np.isfinite(loss):
        raise TrainingAbortedError(
            f"non-finite loss {loss!r} at step {opt.t + 1}; parameters kept")

    model.zero_grads()
    model.backward(np.ascontiguousarray(np.transpose(gw, (2, 0, 1)),
                                        dtype=w_chw.dtype))
    grads = model.named_grads()
    sq = 0.0
    for g in grads.values():
        if not np.all(np.isfinite(g)):
            raise TrainingAbortedError(
                f"non-finite gradient at step {opt.t + 1}; parameters kept")
        sq += float((g * g).sum())
    opt.step(model.named_params(), grads)
    return StepResult(loss=loss, step=opt.t, grad_norm=float(np.sqrt(sq)))
