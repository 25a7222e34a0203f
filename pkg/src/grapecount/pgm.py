"""16-bit binary PGM (P5) depth rasters, stored in millimeters.

Only the subset we need: single image per file, maxval 65535 (8-bit files
with maxval < 256 are also read). Depth 0 means invalid, both on disk and in
memory.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .geometry import DepthImage

MAX_MM = 65535


class PGMError(ValueError):
    pass


def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last token.
    """
    toks: list[bytes] = []
    i, n = 0, len(data)
    while len(toks) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise PGMError("truncated PGM header")
        toks.append(data[start:i])
    return toks, i


def decode_pgm(data: bytes) -> np.ndarray:
    """Raw integer raster (``uint16``) from P5 bytes."""
    toks, end = _tokens(data, 4)
    if toks[0] != b"P5":
        raise PGMError(f"not a binary PGM (magic {toks[0]!r})")
    try:
        width, height, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise PGMError("non-integer PGM header field") from exc
    if width <= 0 or height <= 0 or not 0 < maxval <= MAX_MM:
        raise PGMError(f"bad PGM header: {width}x{height} maxval {maxval}")
    body = data[end + 1 :]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = width * height * dtype.itemsize
    if len(body) < need:
        raise PGMError(f"PGM body truncated: {len(body)} of {need} bytes")
    return np.frombuffer(body[:need], dtype=dtype).reshape(height, width).astype(np.uint16)


def encode_pgm(raster: np.ndarray) -> bytes:
    raster = np.asarray(raster)
    if raster.ndim != 2:
        raise PGMError("raster must be 2-D")
    h, w = raster.shape
    header = b"P5\n%d %d\n%d\n" % (w, h, MAX_MM)
    return header + raster.astype(">u2").tobytes()


def depth_to_mm(image: DepthImage) -> np.ndarray:
    """Round meters to millimeters; depths beyond 65.535 m become invalid."""
    mm = np.floor(image.values * 1000.0 + 0.5)
    mm[mm > MAX_MM] = 0
    return mm.astype(np.uint16)


def mm_to_depth(raster: np.ndarray) -> DepthImage:
    return DepthImage(raster.astype(np.float64) / 1000.0)


def read_depth(path: str | os.PathLike) -> DepthImage:
    return mm_to_depth(decode_pgm(Path(path).read_bytes()))


def write_depth(path: str | os.PathLike, image: DepthImage) -> None:
    Path(path).write_bytes(encode_pgm(depth_to_mm(image)))
