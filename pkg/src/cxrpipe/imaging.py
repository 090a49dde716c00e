"""Grayscale enhancement filters for chest radiographs.

Images are 2-D float64 arrays in row-major order, nominal intensity range
[0, 255]. All filtering runs in double precision; quantization to 8-bit
happens only at file-write time (see imageio).

The enhancement chain: Laplacian L, unsharp S, difference B = S - L, Sobel
magnitude G, mask M = (G / max G) * B, fusion F = L + M, clamp, then a
power-law (gamma) intensity remap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 4-neighbor discrete Laplacian.
LAPLACIAN_KERNEL = np.array([[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]])

# Unsharp kernel chosen so sharpen(I) = I - laplacian(I).
SHARPEN_KERNEL = np.array([[0.0, -1.0, 0.0], [-1.0, 5.0, -1.0], [0.0, -1.0, 0.0]])

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
SOBEL_Y = np.array([[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]])

# Guards division by max(G) on perfectly flat images.
_FLAT_EPS = 1e-12


@dataclass(frozen=True)
class EnhancementTrace:
    """Intermediate stages of one enhancement run, pre-quantization.

    laplacian, difference and mask are signed; sobel is non-negative;
    fused is laplacian + mask before the final clamp.
    """

    laplacian: np.ndarray
    sharpened: np.ndarray
    difference: np.ndarray
    sobel: np.ndarray
    mask: np.ndarray
    fused: np.ndarray
    gamma: float

    def stages(self) -> dict[str, np.ndarray]:
        """Stage arrays keyed by their single-letter debug-dump suffix."""
        return {
            "L": self.laplacian,
            "S": self.sharpened,
            "B": self.difference,
            "G": self.sobel,
            "M": self.mask,
            "F": self.fused,
        }


def check_gray(img: np.ndarray) -> np.ndarray:
    """Validate a grayscale raster: 2-D, non-empty, finite. Returns float64 view."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grayscale image must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("grayscale image must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grayscale image contains NaN or Inf")
    return arr


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Convert an (h, w, 3) raster to luminance via BT.601 weights.

    Y = 0.299 R + 0.587 G + 0.114 B, per pixel.
    """
    arr = np.asarray(rgb, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) RGB raster, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("RGB raster contains NaN or Inf")
    return arr[:, :, 0] * 0.299 + arr[:, :, 1] * 0.587 + arr[:, :, 2] * 0.114


def resize(img: np.ndarray, w: int, h: int) -> np.ndarray:
    """Bilinear resize to h rows by w columns, corner-aligned coordinates.

    Output values stay within the input's [min, max]; resizing to the
    original size returns a bit-identical copy.
    """
    src = check_gray(img)
    if w < 1 or h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {w}x{h}")
    sh, sw = src.shape
    if (w, h) == (sw, sh):
        return src.copy()

    # Corner-aligned source coordinates; a singleton axis maps to 0.
    xs = np.arange(w) * ((sw - 1) / (w - 1)) if w > 1 else np.zeros(1)
    ys = np.arange(h) * ((sh - 1) / (h - 1)) if h > 1 else np.zeros(1)

    x0 = np.clip(np.floor(xs).astype(np.intp), 0, sw - 1)
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, sh - 1)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    fx = xs - x0
    fy = ys - y0

    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy)[:, None] + bot * fy[:, None]


def convolve3x3(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """3x3 cross-correlation with replicate-border padding, no clamping.

    The kernel is applied unflipped (image-processing convention); signed
    output is permitted.
    """
    src = check_gray(img)
    k = np.asarray(kernel, dtype=np.float64)
    if k.shape != (3, 3):
        raise ValueError(f"kernel must be 3x3, got shape {k.shape}")
    if not np.all(np.isfinite(k)):
        raise ValueError("kernel contains NaN or Inf")

    padded = np.pad(src, 1, mode="edge")
    h, w = src.shape
    out = np.zeros_like(src)
    for dy in range(3):
        for dx in range(3):
            out += k[dy, dx] * padded[dy : dy + h, dx : dx + w]
    return out


def laplacian(img: np.ndarray) -> np.ndarray:
    """4-neighbor discrete Laplacian; zero on constant and linear images."""
    return convolve3x3(img, LAPLACIAN_KERNEL)


def sharpen(img: np.ndarray) -> np.ndarray:
    """Unsharp filter, equal to img - laplacian(img)."""
    return convolve3x3(img, SHARPEN_KERNEL)


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    """Gradient magnitude sqrt(Gx^2 + Gy^2) from the standard Sobel pair."""
    gx = convolve3x3(img, SOBEL_X)
    gy = convolve3x3(img, SOBEL_Y)
    return np.sqrt(gx * gx + gy * gy)


def power_law(img: np.ndarray, gamma: float) -> np.ndarray:
    """Gamma remap: 255 * (I / 255) ** gamma. Requires intensities in [0, 255]."""
    src = check_gray(img)
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if src.min() < 0 or src.max() > 255:
        raise ValueError("power_law requires intensities in [0, 255]")
    return 255.0 * (src / 255.0) ** gamma


def enhance(img: np.ndarray, gamma: float = 0.8) -> tuple[np.ndarray, EnhancementTrace]:
    """Run the full enhancement chain on a resized grayscale image.

    Computes L, S, B = S - L, G, M = (G / max G) * B, F = L + M, clamps F
    to [0, 255] and applies the power-law remap. Returns the enhanced
    image together with the unclamped stage trace. Deterministic.
    """
    src = check_gray(img)
    lap = laplacian(src)
    sharp = sharpen(src)
    diff = sharp - lap
    grad = sobel_magnitude(src)
    grad_scaled = grad / max(grad.max(), _FLAT_EPS)
    mask = grad_scaled * diff
    fused = lap + mask
    clamped = np.clip(fused, 0.0, 255.0)
    out = power_law(clamped, gamma)
    trace = EnhancementTrace(
        laplacian=lap,
        sharpened=sharp,
        difference=diff,
        sobel=grad,
        mask=mask,
        fused=fused,
        gamma=float(gamma),
    )
    return out, trace
