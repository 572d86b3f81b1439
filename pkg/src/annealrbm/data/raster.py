"""Portable graymap (PGM) reading and writing."""
import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

LUMINANCE = np.array([0.299, 0.587, 0.114])


def _tokens(data: bytes, count: int) -> Tuple[List[bytes], int]:
    """First ``count`` whitespace-separated header tokens (comments skipped) and the offset after them."""
    tokens: List[bytes] = []
    position = 0
    while len(tokens) < count:
        while position < len(data) and data[position:position + 1].isspace():
            position += 1
        if position >= len(data):
            raise ValueError("Truncated PNM header")
        if data[position:position + 1] == b"#":
            while position < len(data) and data[position:position + 1] not in (b"\n", b"\r"):
                position += 1
            continue
        start = position
        while position < len(data) and not data[position:position + 1].isspace():
            position += 1
        tokens.append(data[start:position])
    return tokens, position + 1


def decode_pnm(data: bytes) -> np.ndarray:
    """Grayscale image in [0, 1] from P2/P5 graymap or P3/P6 pixmap bytes (luminance)."""
    magic = data[:2]
    if magic not in (b"P2", b"P3", b"P5", b"P6"):
        raise ValueError(f"Unsupported image format {magic!r}")
    (_, width, height, maxval), offset = _tokens(data, 4)
    width, height, maxval = int(width), int(height), int(maxval)
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels

    if magic in (b"P2", b"P3"):
        values = np.array(data[offset - 1:].split()[:count], dtype=np.float64)
    else:
        dtype = np.dtype(np.uint8) if maxval < 256 else np.dtype(">u2")
        values = np.frombuffer(data, dtype=dtype, count=count, offset=offset).astype(np.float64)
    if values.size != count:
        raise ValueError(f"Expected {count} samples, found {values.size}")

    image = values.reshape(height, width, channels) / maxval
    if channels == 3:
        return image @ LUMINANCE
    return image[:, :, 0]


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    return decode_pnm(Path(path).read_bytes())


def encode_pgm(raster: np.ndarray) -> bytes:
    """Binary P5 bytes of an 8-bit raster."""
    raster = np.atleast_2d(np.asarray(raster))
    if raster.ndim != 2:
        raise ValueError(f"A graymap is two-dimensional, got shape {raster.shape}")
    height, width = raster.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    return header + np.clip(raster, 0, 255).astype(np.uint8).tobytes()


def write_pgm(path: Union[str, Path], raster: np.ndarray) -> None:
    Path(path).write_bytes(encode_pgm(raster))
    logger.debug(f"Wrote {np.shape(raster)} graymap to {path}")


def bits_raster(bits: np.ndarray) -> np.ndarray:
    """One row of bits per raster row; 1 is bright (255), 0 is dark."""
    return np.asarray(bits, dtype=np.uint8) * np.uint8(255)
