"""Image persistence: 16-bit PGM for numeric fidelity, PNG for display."""

from __future__ import annotations

import numpy as np
from PIL import Image

from .core import GrayImage

PGM_MAXVAL = 65535


def _quantize(img: GrayImage, peak: float | None) -> tuple[np.ndarray, float]:
    if peak is None:
        vals = img.masked_values()
        peak = float(vals.max()) if vals.size else 1.0
    if peak <= 0:
        peak = 1.0
    q = np.clip(img.data / peak, 0.0, 1.0)
    return q, peak


def write_pgm16(img: GrayImage, path, peak: float | None = None) -> float:
    """Write a binary 16-bit PGM (big-endian per the format); returns the peak used."""
    q, peak = _quantize(img, peak)
    raw = np.round(q * PGM_MAXVAL).astype(">u2")
    with open(path, "wb") as f:
        f.write(f"P5\n{img.width} {img.height}\n{PGM_MAXVAL}\n".encode("ascii"))
        f.write(raw.tobytes())
    return peak


def read_pgm16(path) -> GrayImage:
    with open(path, "rb") as f:
        blob = f.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM: magic {fields[0]!r}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    dtype = ">u2" if maxval > 255 else np.uint8
    data = np.frombuffer(blob, dtype=dtype, count=width * height, offset=pos)
    return GrayImage(data.reshape(height, width).astype(float) / maxval)


def write_png16(img: GrayImage, path, peak: float | None = None) -> float:
    """16-bit grayscale PNG; returns the peak used for scaling."""
    q, peak = _quantize(img, peak)
    raw = np.round(q * PGM_MAXVAL).astype(np.uint32)
    Image.fromarray(raw.astype(np.int32), mode="I").convert("I;16").save(path)
    return peak


def write_png8(img: GrayImage, path, peak: float | None = None) -> float:
    """8-bit display PNG; returns the peak used for scaling."""
    q, peak = _quantize(img, peak)
    Image.fromarray(np.round(q * 255).astype(np.uint8), mode="L").save(path)
    return peak


def read_png(path) -> GrayImage:
    im = Image.open(path)
    arr = np.asarray(im, dtype=float)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    scale = 65535.0 if im.mode in ("I", "I;16") else 255.0
    return GrayImage(arr / scale)
