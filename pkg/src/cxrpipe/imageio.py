"""Image file I/O: PNG (via Pillow) and binary PGM (P5), plus stage dumps."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError
from .imaging import EnhancementTrace


def quantize(img: np.ndarray) -> np.ndarray:
    """Round and clip float intensities to uint8."""
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def read_image(path: str | Path) -> np.ndarray:
    """Read an image file; grayscale gives (h, w), color gives (h, w, 3)."""
    with Image.open(path) as im:
        if im.mode in ("L", "I;16", "I"):
            return np.asarray(im.convert("L"), dtype=np.float64)
        return np.asarray(im.convert("RGB"), dtype=np.float64)


def write_png(path: str | Path, img: np.ndarray) -> None:
    """Write a grayscale (h, w) or RGB (h, w, 3) array as 8-bit PNG."""
    arr = np.asarray(img)
    if arr.ndim == 2:
        Image.fromarray(quantize(arr), mode="L").save(path, format="PNG")
    elif arr.ndim == 3 and arr.shape[2] == 3:
        data = arr if arr.dtype == np.uint8 else quantize(arr)
        Image.fromarray(data, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"cannot write array of shape {arr.shape} as PNG")


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    """Write a grayscale array as binary PGM (P5, maxval 255)."""
    arr = quantize(np.asarray(img))
    if arr.ndim != 2:
        raise ValueError(f"PGM requires a 2-D array, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(arr.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary PGM (P5, maxval <= 255) into a float64 array."""
    data = Path(path).read_bytes()
    m = re.match(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s", data)
    if m is None:
        raise FormatError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval > 255:
        raise FormatError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    pixels = data[m.end() :]
    if len(pixels) < w * h:
        raise FormatError(f"{path}: truncated PGM payload")
    return (
        np.frombuffer(pixels[: w * h], dtype=np.uint8)
        .reshape(h, w)
        .astype(np.float64)
    )


def read_grayscale(path: str | Path) -> np.ndarray:
    """Read any supported image as grayscale float64 (BT.601 for color)."""
    p = Path(path)
    if p.suffix.lower() == ".pgm":
        return read_pgm(p)
    arr = read_image(p)
    if arr.ndim == 2:
        return arr
    from .imaging import to_grayscale

    return to_grayscale(arr)


def write_trace(stem: str | Path, trace: EnhancementTrace) -> list[Path]:
    """Dump enhancement stages as '<stem>.{L,S,B,G,M,F}.png' debug images.

    Signed stages are min-max scaled to [0, 255] for display; flat stages
    come out black. Returns the written paths.
    """
    stem = Path(stem)
    written = []
    for suffix, stage in trace.stages().items():
        lo, hi = float(stage.min()), float(stage.max())
        scaled = (stage - lo) * (255.0 / (hi - lo)) if hi > lo else np.zeros_like(stage)
        out = stem.with_name(f"{stem.name}.{suffix}.png")
        write_png(out, scaled)
        written.append(out)
    return written
