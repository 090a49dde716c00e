"""Classifier inputs: HOG descriptors and normalized pixel tensors.

HOG here is the classic dense configuration: central-difference gradients
(replicate edges), per-cell orientation histograms with linear vote
splitting between adjacent bins, and L2-Hys block normalization. Bin
centers sit at i * (span / orientations), so a 0-degree gradient votes
entirely into bin 0.

Feature matrices persist in the FEAT1 binary format:

    magic b"FEAT1" | u32 rows | u32 dim | u32 id_len | descriptor_id utf-8
    | rows*dim float32, row-major, little-endian

with a sidecar CSV of class-label names aligned by row.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ClassLabel
from .errors import FormatError
from .imaging import check_gray, resize

_FEAT_MAGIC = b"FEAT1"
_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class HogParams:
    cell_size: int = 8
    block_size: int = 2
    block_stride: int = 1
    orientations: int = 9
    signed_gradients: bool = False
    block_norm_clip: float = 0.2

    def __post_init__(self) -> None:
        if self.cell_size < 2:
            raise ValueError(f"cell_size must be >= 2, got {self.cell_size}")
        if self.orientations < 2:
            raise ValueError(f"orientations must be >= 2, got {self.orientations}")
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.block_stride < 1:
            raise ValueError(f"block_stride must be >= 1, got {self.block_stride}")

    @property
    def span_degrees(self) -> float:
        return 360.0 if self.signed_gradients else 180.0

    def descriptor_id(self, side: int) -> str:
        sign = "signed" if self.signed_gradients else "unsigned"
        return (
            f"hog/cell{self.cell_size}-block{self.block_size}"
            f"-stride{self.block_stride}-bins{self.orientations}"
            f"-{sign}-l2hys{self.block_norm_clip}@{side}"
        )

    def descriptor_length(self, height: int, width: int) -> int:
        cells_y = height // self.cell_size
        cells_x = width // self.cell_size
        blocks_y = (cells_y - self.block_size) // self.block_stride + 1
        blocks_x = (cells_x - self.block_size) // self.block_stride + 1
        if blocks_y < 1 or blocks_x < 1:
            raise ValueError(
                f"image {height}x{width} too small for "
                f"{self.block_size}-cell blocks of {self.cell_size}px cells"
            )
        return blocks_y * blocks_x * self.block_size**2 * self.orientations


def gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference (gx, gy) with replicate-edge borders."""
    src = check_gray(img)
    padded = np.pad(src, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx, gy


def hog(img: np.ndarray, params: HogParams = HogParams()) -> np.ndarray:
    """Dense HOG descriptor of a grayscale image.

    Image dimensions must be divisible by the cell size. The descriptor
    concatenates L2-Hys-normalized blocks in row-major block order, cells
    row-major within each block.
    """
    src = check_gray(img)
    h, w = src.shape
    cs = params.cell_size
    if h % cs or w % cs:
        raise ValueError(
            f"image dimensions {h}x{w} must be divisible by cell_size {cs}"
        )

    gx, gy = gradients(src)
    magnitude = np.sqrt(gx * gx + gy * gy)
    angle = np.degrees(np.arctan2(gy, gx)) % params.span_degrees

    nbins = params.orientations
    bin_width = params.span_degrees / nbins
    position = angle / bin_width
    low = np.floor(position).astype(np.intp)
    frac = position - low
    low %= nbins
    high = (low + 1) % nbins

    cells_y, cells_x = h // cs, w // cs
    cy = (np.arange(h) // cs)[:, None]
    cx = (np.arange(w) // cs)[None, :]
    cell_index = (cy * cells_x + cx).ravel()

    hist = np.zeros((cells_y * cells_x, nbins))
    np.add.at(hist, (cell_index, low.ravel()), (magnitude * (1 - frac)).ravel())
    np.add.at(hist, (cell_index, high.ravel()), (magnitude * frac).ravel())
    hist = hist.reshape(cells_y, cells_x, nbins)

    bs, stride, clip = params.block_size, params.block_stride, params.block_norm_clip
    blocks_y = (cells_y - bs) // stride + 1
    blocks_x = (cells_x - bs) // stride + 1
    out = []
    for by in range(blocks_y):
        for bx in range(blocks_x):
            block = hist[
                by * stride : by * stride + bs, bx * stride : bx * stride + bs
            ].ravel()
            out.append(_l2_hys(block, clip))
    return np.concatenate(out)


def _l2_hys(v: np.ndarray, clip: float) -> np.ndarray:
    norm = np.sqrt(np.sum(v * v))
    if norm < _ZERO_NORM:
        return np.zeros_like(v)
    v = np.minimum(v / norm, clip)
    norm = np.sqrt(np.sum(v * v))
    if norm < _ZERO_NORM:
        return np.zeros_like(v)
    return v / norm


def to_pixel_tensor(img: np.ndarray, side: int = 64) -> np.ndarray:
    """Resize to side x side and scale intensities into [0, 1]."""
    if side < 8:
        raise ValueError(f"tensor side must be >= 8, got {side}")
    return resize(img, side, side) / 255.0


def pixel_descriptor_id(side: int) -> str:
    return f"pixels/{side}x{side}"


_HOG_ID = re.compile(
    r"^hog/cell(\d+)-block(\d+)-stride(\d+)-bins(\d+)"
    r"-(signed|unsigned)-l2hys([0-9.]+)@(\d+)$"
)
_PIXEL_ID = re.compile(r"^pixels/(\d+)x(\d+)$")


def parse_descriptor(descriptor_id: str) -> tuple[str, HogParams | None, int]:
    """Invert descriptor_id()/pixel_descriptor_id() into (kind, params, side)."""
    m = _HOG_ID.match(descriptor_id)
    if m:
        params = HogParams(
            cell_size=int(m.group(1)),
            block_size=int(m.group(2)),
            block_stride=int(m.group(3)),
            orientations=int(m.group(4)),
            signed_gradients=m.group(5) == "signed",
            block_norm_clip=float(m.group(6)),
        )
        return "hog", params, int(m.group(7))
    m = _PIXEL_ID.match(descriptor_id)
    if m:
        if m.group(1) != m.group(2):
            raise FormatError(f"non-square pixel descriptor: {descriptor_id!r}")
        return "pixels", None, int(m.group(1))
    raise FormatError(f"unrecognized feature descriptor: {descriptor_id!r}")


def save_features(
    path: str | Path, matrix: np.ndarray, descriptor_id: str
) -> None:
    """Write a (rows, dim) feature matrix in the FEAT1 format."""
    X = np.ascontiguousarray(matrix, dtype=np.float32)
    if X.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {X.shape}")
    ident = descriptor_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_FEAT_MAGIC)
        fh.write(struct.pack("<III", X.shape[0], X.shape[1], len(ident)))
        fh.write(ident)
        fh.write(X.astype("<f4").tobytes())


def load_features(path: str | Path) -> tuple[np.ndarray, str]:
    """Read a FEAT1 file; returns (matrix, descriptor_id)."""
    data = Path(path).read_bytes()
    if data[:5] != _FEAT_MAGIC:
        raise FormatError(f"{path}: bad magic, expected FEAT1")
    if len(data) < 5 + 12:
        raise FormatError(f"{path}: truncated FEAT1 header")
    rows, dim, id_len = struct.unpack_from("<III", data, 5)
    offset = 5 + 12
    if len(data) < offset + id_len:
        raise FormatError(f"{path}: truncated descriptor id")
    ident = data[offset : offset + id_len].decode("utf-8")
    offset += id_len
    expected = rows * dim * 4
    if len(data) - offset != expected:
        raise FormatError(
            f"{path}: payload is {len(data) - offset} bytes, expected {expected}"
        )
    X = np.frombuffer(data, dtype="<f4", count=rows * dim, offset=offset)
    return X.reshape(rows, dim).astype(np.float32), ident


def save_labels(path: str | Path, labels: np.ndarray | list[int]) -> None:
    """Write the row-aligned label sidecar CSV (header 'label')."""
    with open(path, "w", newline="") as fh:
        fh.write("label\n")
        for y in labels:
            fh.write(f"{ClassLabel(int(y)).name}\n")


def load_labels(path: str | Path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "label":
        raise FormatError(f"{path}: expected 'label' header")
    try:
        return np.array([ClassLabel[name] for name in lines[1:] if name], dtype=np.int64)
    except KeyError as exc:
        raise FormatError(f"{path}: unknown label {exc}") from None
