"""Portable binary checkpoints.

Layout: 8-byte magic "GCML0001", u32 LE version, then one entry per
tensor (u16 LE name length, UTF-8 name, u8 dtype code (0 = f32), u8 ndim,
u32 LE dims, raw little-endian row-major values), closed by a u32 LE
CRC-32 (IEEE) over everything before it. The CRC is validated before any
tensor is accepted.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .errors import DataError
from .model import Model, ModelConfig, build_model

MAGIC = b"GCML0001"
VERSION = 1
_DTYPE_F32 = 0


def _entries(model: Model) -> dict[str, np.ndarray]:
    out = {name: p.data for name, p in model.named_parameters().items()}
    out.update(model.named_buffers())
    return out


def save_checkpoint(model: Model, path) -> None:
    if model.config.dtype != "f32":
        raise ValueError("checkpoints store f32 models only")
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", VERSION)
    for name, arr in _entries(model).items():
        name_b = name.encode("utf-8")
        buf += struct.pack("<H", len(name_b))
        buf += name_b
        buf += struct.pack("<BB", _DTYPE_F32, arr.ndim)
        for dim in arr.shape:
            buf += struct.pack("<I", dim)
        buf += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def _parse(blob: bytes) -> dict[str, np.ndarray]:
    if len(blob) < len(MAGIC) + 8:
        raise DataError("checkpoint truncated")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise DataError("checkpoint CRC mismatch")
    if blob[: len(MAGIC)] != MAGIC:
        raise DataError("bad checkpoint magic")
    pos = len(MAGIC)
    version = struct.unpack_from("<I", blob, pos)[0]
    pos += 4
    if version != VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    end = len(blob) - 4
    tensors: dict[str, np.ndarray] = {}
    while pos < end:
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        dtype_code, ndim = struct.unpack_from("<BB", blob, pos)
        pos += 2
        if dtype_code != _DTYPE_F32:
            raise DataError(f"unknown dtype code {dtype_code} for {name!r}")
        shape = struct.unpack_from(f"<{ndim}I", blob, pos) if ndim else ()
        pos += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        nbytes = 4 * count
        if pos + nbytes > end:
            raise DataError(f"checkpoint truncated inside {name!r}")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
        pos += nbytes
        tensors[name] = arr.reshape(shape).astype(np.float32)
    return tensors


def load_checkpoint(path, config: ModelConfig) -> Model:
    """Rebuild a model from `config` and fill it from the checkpoint.

    Every stored entry must match a model entry by name and shape.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    tensors = _parse(blob)
    model = build_model(config)
    expected = _entries(model)
    if set(tensors) != set(expected):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise DataError(f"checkpoint does not match config: missing {missing[:3]}, "
                        f"unexpected {extra[:3]}")
    params = model.named_parameters()
    for name, arr in tensors.items():
        dst = expected[name]
        if tuple(arr.shape) != tuple(dst.shape):
            raise DataError(f"shape mismatch for {name!r}: "
                            f"{arr.shape} in file vs {dst.shape} in model")
        if name in params:
            params[name].data = arr.copy()
    for prefix_name, layer in model._walk():
        from .gconv import GroupBatchNormLayer

        if isinstance(layer, GroupBatchNormLayer):
            layer.stats.mean = tensors[f"{prefix_name}.running_mean"].copy()
            layer.stats.var = tensors[f"{prefix_name}.running_var"].copy()
            layer.stats.initialized = True
    model.phase1_done = bool(tensors["meta.phase1_done"][0] > 0.5)
    return model
