"""On-disk formats: FTEN float tensors and binary portable any-maps (P5/P6).

FTEN layout (all little endian)::

    b"FTEN" | u32 rank | rank x u32 dims | prod(dims) x float32

Dims are ordered height, width, channels and the payload is row-major with
the channel index varying fastest.
"""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

from wordfence.errors import FormatError

FTEN_MAGIC = b"FTEN"


def encode_ften(tensor) -> bytes:
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    header = FTEN_MAGIC + struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def decode_ften(buf: bytes, offset: int = 0, source: str = "<bytes>") -> tuple[np.ndarray, int]:
    """Decode one tensor starting at ``offset``; returns it with the next offset."""
    if buf[offset:offset + 4] != FTEN_MAGIC:
        raise FormatError(f"{source}: bad FTEN magic at byte {offset}")
    try:
        (rank,) = struct.unpack_from("<I", buf, offset + 4)
        dims = struct.unpack_from(f"<{rank}I", buf, offset + 8)
    except struct.error as exc:
        raise FormatError(f"{source}: truncated FTEN header") from exc
    start = offset + 8 + 4 * rank
    count = int(np.prod(dims, dtype=np.int64))
    end = start + 4 * count
    if end > len(buf):
        raise FormatError(f"{source}: FTEN payload truncated (need {end} bytes, have {len(buf)})")
    arr = np.frombuffer(buf, dtype="<f4", count=count, offset=start).reshape(dims)
    return arr.astype(np.float32), end


def write_ften(path, tensor) -> None:
    Path(path).write_bytes(encode_ften(tensor))


def read_ften(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    arr, end = decode_ften(buf, source=str(path))
    if end != len(buf):
        raise FormatError(f"{path}: {len(buf) - end} trailing bytes after FTEN tensor")
    return arr


_PNM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def _parse_pnm(buf: bytes, source: str):
    fields, pos = [], 0
    for _ in range(4):
        m = _PNM_TOKEN.match(buf, pos)
        if not m:
            raise FormatError(f"{source}: truncated PNM header")
        fields.append(m.group(1))
        pos = m.end()
    magic = fields[0]
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{source}: unsupported PNM magic {magic!r}")
    try:
        width, height, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise FormatError(f"{source}: malformed PNM header") from exc
    if maxval != 255:
        raise FormatError(f"{source}: only maxval 255 is supported, got {maxval}")
    channels = 1 if magic == b"P5" else 3
    pos += 1  # single whitespace byte before the raster
    size = width * height * channels
    raster = buf[pos:pos + size]
    if len(raster) != size:
        raise FormatError(f"{source}: PNM raster truncated")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)
    return arr if channels == 3 else arr[:, :, 0]


def encode_pnm(pixels) -> bytes:
    arr = np.asarray(pixels)
    if arr.dtype != np.uint8:
        raise FormatError(f"PNM pixels must be uint8, got {arr.dtype}")
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise FormatError(f"cannot encode shape {arr.shape} as PNM")
    h, w = arr.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode() + np.ascontiguousarray(arr).tobytes()


def write_pnm(path, pixels) -> None:
    Path(path).write_bytes(encode_pnm(pixels))


def read_pnm(path) -> np.ndarray:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read ({exc.strerror})") from exc
    return _parse_pnm(buf, str(path))


def image_to_u8(image) -> np.ndarray:
    """Quantize an ``(H, W, 1)`` or ``(H, W)`` image in [0, 1] to gray bytes."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    return np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)


def u8_to_image(pixels) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim != 2:
        raise FormatError(f"expected a gray image, got shape {arr.shape}")
    return (arr.astype(np.float64) / 255.0)[:, :, None]


def read_image(path) -> np.ndarray:
    """Read a P5 file as a float ``(H, W, 1)`` image in [0, 1]."""
    pixels = read_pnm(path)
    if pixels.ndim != 2:
        raise FormatError(f"{path}: expected a P5 gray image")
    return u8_to_image(pixels)


def write_image(path, image) -> None:
    write_pnm(path, image_to_u8(image))
