"""Binary PGM (P5) images and RLM1 region label maps."""

from __future__ import annotations

import os
import struct

import numpy as np

RLM_MAGIC = b"RLM1"


class FormatError(ValueError):
    pass


def _pgm_tokens(buf: bytes, count: int):
    """Read ``count`` whitespace separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            while pos < len(buf) and buf[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Load an 8-bit binary PGM as a ``(height, width)`` uint8 array."""
    with open(path, "rb") as fh:
        buf = fh.read()
    try:
        tokens, offset = _pgm_tokens(buf, 4)
    except IndexError as exc:
        raise FormatError(f"{path}: truncated PGM header") from exc
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad PGM dimensions")
    if maxval != 255:
        raise FormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    raster = buf[offset:offset + width * height]
    if len(raster) != width * height:
        raise FormatError(f"{path}: truncated PGM raster")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path: str | os.PathLike, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("write_pgm expects a 2-D image")
    if image.dtype != np.uint8:
        if image.min() < 0 or image.max() > 255:
            raise ValueError("pixel values outside [0, 255]")
        image = image.astype(np.uint8)
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(np.ascontiguousarray(image).tobytes())


def read_rlm(path: str | os.PathLike) -> np.ndarray:
    """Load an RLM1 label map as a ``(height, width)`` int64 array."""
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != RLM_MAGIC:
        raise FormatError(f"{path}: missing RLM1 magic")
    if len(buf) < 12:
        raise FormatError(f"{path}: truncated RLM1 header")
    width, height = struct.unpack("<II", buf[4:12])
    body = buf[12:]
    if width == 0 or height == 0 or len(body) != 4 * width * height:
        raise FormatError(f"{path}: RLM1 size does not match {width}x{height}")
    ids = np.frombuffer(body, dtype="<u4").reshape(height, width)
    return ids.astype(np.int64)


def write_rlm(path: str | os.PathLike, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise ValueError("write_rlm expects a non-empty 2-D label map")
    if labels.min() < 0 or labels.max() > 0xFFFFFFFF:
        raise ValueError("region ids must fit in an unsigned 32-bit integer")
    height, width = labels.shape
    with open(path, "wb") as fh:
        fh.write(RLM_MAGIC + struct.pack("<II", width, height))
        fh.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())
