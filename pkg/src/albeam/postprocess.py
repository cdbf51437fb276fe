"""Envelope detection, log compression and 8-bit rendering."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy.signal import hilbert

from .beamformers import BeamformedData, Method
from .exceptions import ContractViolationError

DEFAULT_DYNAMIC_RANGE = 60.0


@dataclass
class BModeImage:
    """Log-compressed image in dB (values in [-dynamic_range, 0]).

    normalization_max is the linear amplitude mapped to 0 dB; it is 0.0 for an
    all-zero input, in which case every pixel sits at the floor.
    """

    db_values: np.ndarray
    dynamic_range: float
    normalization_max: float
    method_tag: Method = Method.DAS

    def __post_init__(self):
        self.db_values = np.asarray(self.db_values, dtype=np.float64)

    @property
    def shape(self) -> tuple[int, int]:
        return self.db_values.shape

    def normalized(self) -> np.ndarray:
        """Map [-dynamic_range, 0] dB onto [0, 1]."""
        return (self.db_values + self.dynamic_range) / self.dynamic_range


def envelope(b: BeamformedData | np.ndarray) -> np.ndarray:
    """Magnitude of the analytic signal, computed along depth per lateral line."""
    values = b.values if isinstance(b, BeamformedData) else np.asarray(b, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ContractViolationError("envelope input must be finite")
    return np.abs(hilbert(values, axis=0))


def log_compress(env: np.ndarray, dynamic_range: float = DEFAULT_DYNAMIC_RANGE,
                 method_tag: Method = Method.DAS) -> BModeImage:
    """Normalize by the image maximum and compress to the dynamic range."""
    env = np.asarray(env, dtype=np.float64)
    if np.any(env < 0):
        raise ContractViolationError("envelope values must be >= 0")
    if dynamic_range <= 0:
        raise ContractViolationError("dynamic_range must be positive")
    peak = float(env.max()) if env.size else 0.0
    if peak == 0.0:
        db = np.full(env.shape, -dynamic_range, dtype=np.float64)
        return BModeImage(db_values=db, dynamic_range=dynamic_range,
                          normalization_max=0.0, method_tag=method_tag)
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(env / peak)
    db = np.clip(db, -dynamic_range, 0.0)
    return BModeImage(db_values=db, dynamic_range=dynamic_range,
                      normalization_max=peak, method_tag=method_tag)


def to_gray_u8(img: BModeImage) -> np.ndarray:
    """Linear map [-DR, 0] dB -> [0, 255] with round-half-up."""
    scaled = (img.db_values + img.dynamic_range) / img.dynamic_range * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def render_png(img: BModeImage) -> bytes:
    """Encode as an 8-bit grayscale PNG with no ancillary text metadata."""
    buf = io.BytesIO()
    Image.fromarray(to_gray_u8(img), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def parse_png(data: bytes) -> np.ndarray:
    """Decode PNG bytes back into a uint8 pixel array."""
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)
