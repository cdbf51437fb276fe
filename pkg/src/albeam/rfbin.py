"""rfbin: checksummed binary container for RF frames and delayed tensors.

Layout (all integers little-endian):

    8 bytes   magic "RFBIN001"
    u32       header length in bytes
    ...       canonical JSON header (utf-8, sorted keys)
    ...       raw sample payload, row-major, dtype/shape from the header
    u64       blake2b-8 checksum of every preceding byte

The header records the payload kind ("rf_frame" or "delayed_tensor"), dtype,
shape, probe config, and kind-specific fields (t0/provenance or grid).
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .exceptions import IntegrityError
from .geometry import DelayedTensor, ImageGrid
from .sim import ProbeConfig, RFFrame

MAGIC = b"RFBIN001"
_DTYPES = {"<f4": np.dtype("<f4"), "<f8": np.dtype("<f8")}


def _checksum(data: bytes) -> bytes:
    return hashlib.blake2b(data, digest_size=8).digest()


def _encode(header: dict, payload: np.ndarray) -> bytes:
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = MAGIC + struct.pack("<I", len(blob)) + blob + payload.tobytes()
    return body + _checksum(body)


def emit(obj: RFFrame | DelayedTensor) -> bytes:
    """Serialize an RFFrame or DelayedTensor to rfbin bytes."""
    if isinstance(obj, RFFrame):
        payload = np.ascontiguousarray(obj.samples, dtype="<f8")
        header = {
            "kind": "rf_frame",
            "dtype": "<f8",
            "shape": list(payload.shape),
            "t0": obj.t0,
            "probe": obj.probe.to_dict(),
            "provenance": obj.provenance,
        }
    elif isinstance(obj, DelayedTensor):
        payload = np.ascontiguousarray(obj.data, dtype="<f8")
        header = {
            "kind": "delayed_tensor",
            "dtype": "<f8",
            "shape": list(payload.shape),
            "probe": obj.probe.to_dict(),
            "grid": obj.grid.to_dict(),
        }
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} as rfbin")
    return _encode(header, payload)


def parse(data: bytes) -> RFFrame | DelayedTensor:
    """Parse rfbin bytes, validating magic, structure and checksum."""
    if len(data) < len(MAGIC) + 4 + 8:
        raise IntegrityError("rfbin data truncated")
    if data[: len(MAGIC)] != MAGIC:
        raise IntegrityError("bad rfbin magic")
    body, stored = data[:-8], data[-8:]
    if _checksum(body) != stored:
        raise IntegrityError("rfbin checksum mismatch")

    (header_len,) = struct.unpack_from("<I", data, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if header_end > len(body):
        raise IntegrityError("rfbin header exceeds file size")
    try:
        header = json.loads(data[header_start:header_end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"rfbin header unreadable: {exc}") from exc

    dtype = _DTYPES.get(header.get("dtype"))
    if dtype is None:
        raise IntegrityError(f"unknown rfbin dtype {header.get('dtype')!r}")
    shape = tuple(int(s) for s in header["shape"])
    expected = int(np.prod(shape)) * dtype.itemsize
    raw = body[header_end:]
    if len(raw) != expected:
        raise IntegrityError(
            f"rfbin payload is {len(raw)} bytes, header promises {expected}")
    array = np.frombuffer(raw, dtype=dtype).reshape(shape).astype(np.float64)

    kind = header.get("kind")
    probe = ProbeConfig.from_dict(header["probe"])
    if kind == "rf_frame":
        return RFFrame(samples=array, t0=float(header["t0"]), probe=probe,
                       provenance=header.get("provenance", ""))
    if kind == "delayed_tensor":
        grid = ImageGrid.from_dict(header["grid"])
        return DelayedTensor(data=array, grid=grid, probe=probe)
    raise IntegrityError(f"unknown rfbin kind {kind!r}")


def write_rfbin(path, obj: RFFrame | DelayedTensor) -> None:
    with open(path, "wb") as fh:
        fh.write(emit(obj))


def read_rfbin(path) -> RFFrame | DelayedTensor:
    with open(path, "rb") as fh:
        return parse(fh.read())
