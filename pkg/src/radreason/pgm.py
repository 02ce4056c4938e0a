"""Minimal binary PGM (P5) reader/writer for glyph bitmaps."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError


def write_pgm(path: str | Path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ParseError("PGM output must be a 2-D grayscale array")
    h, w = image.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ParseError(f"{path}: only binary PGM (P5) is supported")
    # header tokens: magic, width, height, maxval; '#' comments allowed
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3 and pos < len(data):
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if len(tokens) < 3:
        raise ParseError(f"{path}: truncated PGM header")
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"{path}: bad PGM header") from exc
    if maxval != 255:
        raise ParseError(f"{path}: only maxval 255 is supported")
    pos += 1  # single whitespace after maxval
    pixels = data[pos : pos + w * h]
    if len(pixels) != w * h:
        raise ParseError(f"{path}: expected {w * h} pixels, got {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w).copy()
