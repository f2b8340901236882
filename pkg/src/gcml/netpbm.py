"""Binary PGM (P5) and PPM (P6) reading and writing, maxval 255 only.

Pixels map to [0, 1] floats on load; writing rounds half up to 8 bits, so
a save/load round trip moves any value by at most 1/510.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .tensor import Tensor


def _read_header(blob: bytes):
    """Parse magic, width, height, maxval; returns (channels, w, h, offset)."""
    if len(blob) < 2:
        raise DataError("file too short for a netpbm header")
    magic = blob[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise DataError(f"unsupported netpbm magic {magic!r}")
    fields = []
    pos = 2
    while len(fields) < 3:
        if pos >= len(blob):
            raise DataError("truncated netpbm header")
        ch = blob[pos : pos + 1]
        if ch == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
        elif ch.isspace():
            pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(blob) and blob[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(blob[start:pos]))
        else:
            raise DataError(f"malformed netpbm header byte {ch!r}")
    if pos >= len(blob) or not blob[pos : pos + 1].isspace():
        raise DataError("missing whitespace after netpbm header")
    pos += 1
    width, height, maxval = fields
    if maxval != 255:
        raise DataError(f"only maxval 255 is supported, got {maxval}")
    if width < 1 or height < 1:
        raise DataError("degenerate image dimensions")
    return channels, width, height, pos


def load_pgm_ppm(path) -> Tensor:
    """Load a binary PGM/PPM file as a C x H x W tensor in [0, 1]."""
    with open(path, "rb") as fh:
        blob = fh.read()
    channels, width, height, offset = _read_header(blob)
    need = width * height * channels
    payload = blob[offset : offset + need]
    if len(payload) < need:
        raise DataError(f"truncated payload: {len(payload)} of {need} bytes")
    raw = np.frombuffer(payload, dtype=np.uint8)
    if channels == 1:
        img = raw.reshape(1, height, width)
    else:
        img = raw.reshape(height, width, 3).transpose(2, 0, 1)
    return Tensor((img / 255.0).astype(np.float32))


def _to_bytes(image) -> np.ndarray:
    arr = image.data if isinstance(image, Tensor) else np.asarray(image)
    if arr.ndim == 2:
        arr = arr[None]
    quant = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5)  # round half up
    return quant.astype(np.uint8)


def save_pgm(path, image) -> None:
    arr = _to_bytes(image)
    if arr.shape[0] != 1:
        raise ValueError("save_pgm expects a single-channel image")
    _, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr[0].tobytes())


def save_ppm(path, image) -> None:
    arr = _to_bytes(image)
    if arr.shape[0] != 3:
        raise ValueError("save_ppm expects a three-channel image")
    _, h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.transpose(1, 2, 0).tobytes())
