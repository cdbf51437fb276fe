"""Model/optimizer snapshots as a table of named tensors.

Layout: magic ``ALBF0001``, a u32 entry count, then per entry a u16 name
length, the UTF-8 name, a u8 dtype code, a u8 rank, u32 dims, and the raw
little-endian data; an 8-byte BLAKE2b digest of everything preceding it
closes the file. Round trips are bit-exact; the embedded architecture digest
refuses loads into a mismatched configuration.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from ..exceptions import IntegrityError
from .engine import Adam, TrainConfig
from .unet import UNet, UNetConfig

MAGIC = b"ALBF0001"

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8"),
                3: np.dtype("<i8"), 4: np.dtype("u1")}
_CODE_FOR = {v: k for k, v in _DTYPE_CODES.items()}


def _checksum(blob: bytes) -> bytes:
    return hashlib.blake2b(blob, digest_size=8).digest()


def _encode_entry(name: str, arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr)
    if data.dtype not in _CODE_FOR:
        data = data.astype("<f8")
    nb = name.encode()
    head = struct.pack("<H", len(nb)) + nb
    head += struct.pack("<BB", _CODE_FOR[data.dtype], data.ndim)
    head += struct.pack(f"<{data.ndim}I", *data.shape)
    return head + data.tobytes()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise IntegrityError("checkpoint truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def entry(self) -> tuple[str, np.ndarray]:
        (nlen,) = struct.unpack("<H", self.take(2))
        name = self.take(nlen).decode()
        code, rank = struct.unpack("<BB", self.take(2))
        if code not in _DTYPE_CODES:
            raise IntegrityError(f"unknown dtype code {code}")
        shape = struct.unpack(f"<{rank}I", self.take(4 * rank))
        dt = _DTYPE_CODES[code]
        n = int(np.prod(shape, dtype=np.int64)) if rank else 1
        arr = np.frombuffer(self.take(n * dt.itemsize), dtype=dt).reshape(shape)
        return name, arr.copy()


def _bundle(model: UNet, opt: Adam) -> list[tuple[str, np.ndarray]]:
    cfg_json = json.dumps(model.cfg.to_dict(), sort_keys=True,
                          separators=(",", ":")).encode()
    train_json = json.dumps(opt.cfg.to_dict(), sort_keys=True,
                            separators=(",", ":")).encode()
    entries = [
        ("meta/version", np.array([1], dtype="<i8")),
        ("meta/config_json", np.frombuffer(cfg_json, dtype="u1")),
        ("meta/config_digest",
         np.frombuffer(bytes.fromhex(model.cfg.digest()), dtype="u1")),
        ("meta/train_config_json", np.frombuffer(train_json, dtype="u1")),
        ("meta/step", np.array([opt.t], dtype="<i8")),
    ]
    for name, arr in model.named_params():
        entries.append((f"param/{name}", arr))
        zeros = np.zeros_like(arr)
        entries.append((f"adam/m/{name}", opt.m.get(name, zeros)))
        entries.append((f"adam/v/{name}", opt.v.get(name, zeros)))
    for name, arr in model.named_state():
        entries.append((f"state/{name}", arr))
    return entries


def save_checkpoint(path, model: UNet, opt: Adam) -> str:
    """Write a snapshot; returns the file's checksum as hex."""
    entries = _bundle(model, opt)
    body = MAGIC + struct.pack("<I", len(entries))
    body += b"".join(_encode_entry(n, a) for n, a in entries)
    digest = _checksum(body)
    with open(path, "wb") as fh:
        fh.write(body + digest)
    return digest.hex()


def read_table(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4 + 8:
        raise IntegrityError("checkpoint truncated")
    if blob[:len(MAGIC)] != MAGIC:
        raise IntegrityError("bad checkpoint magic")
    if _checksum(blob[:-8]) != blob[-8:]:
        raise IntegrityError("checkpoint checksum mismatch")
    rd = _Reader(blob[:-8])
    rd.take(len(MAGIC))
    (count,) = struct.unpack("<I", rd.take(4))
    table = {}
    for _ in range(count):
        name, arr = rd.entry()
        table[name] = arr
    if rd.pos != len(rd.blob):
        raise IntegrityError("trailing bytes after checkpoint table")
    return table


def checkpoint_checksum(path) -> str:
    """Validate the file and return its content checksum as hex."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 4 + 8 or blob[:len(MAGIC)] != MAGIC:
        raise IntegrityError("not a checkpoint file")
    if _checksum(blob[:-8]) != blob[-8:]:
        raise IntegrityError("checkpoint checksum mismatch")
    return blob[-8:].hex()


def load_checkpoint(path, expected_config: UNetConfig | None = None):
    """Rebuild (model, optimizer) from a snapshot file."""
    table = read_table(path)
    try:
        cfg = UNetConfig.from_dict(json.loads(bytes(table["meta/config_json"])))
        train_cfg = TrainConfig.from_dict(
            json.loads(bytes(table["meta/train_config_json"])))
        step = int(table["meta/step"][0])
    except (KeyError, ValueError, TypeError) as exc:
        raise IntegrityError(f"malformed checkpoint metadata: {exc}") from exc
    stored_digest = bytes(table["meta/config_digest"]).hex()
    if stored_digest != cfg.digest():
        raise IntegrityError("checkpoint config digest does not match its config")
    if expected_config is not None and expected_config.digest() != stored_digest:
        raise IntegrityError(
            "checkpoint was written for a different model configuration")

    model = UNet(cfg)
    opt = Adam(train_cfg)
    opt.t = step
    for name, arr in model.named_params():
        key = f"param/{name}"
        if key not in table or table[key].shape != arr.shape:
            raise IntegrityError(f"checkpoint missing or mis-shaped {key}")
        arr[...] = table[key].astype(arr.dtype)
        opt.m[name] = table[f"adam/m/{name}"].astype(arr.dtype).copy()
        opt.v[name] = table[f"adam/v/{name}"].astype(arr.dtype).copy()
    for name, arr in model.named_state():
        key = f"state/{name}"
        if key not in table or table[key].shape != arr.shape:
            raise IntegrityError(f"checkpoint missing or mis-shaped {key}")
        arr[...] = table[key].astype(arr.dtype)
    return model, opt
