"""Local surrogate explanations for image classifiers.

The pipeline: partition the image into a regular grid of superpixels,
sample random on/off masks, replace off segments with the image mean,
score every masked image with the black box, weight rows by an
exponential kernel on cosine distance to the unmasked instance, and fit
a weighted ridge model whose coefficients rank the segments. Overlays
tint the strongest segments green (supports the class) or red (detracts).

The black box enters as a callable mapping a stack of grayscale images
(n, h, w) to class probabilities (n, n_classes), which keeps this module
independent of any particular feature recipe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageio import quantize
from .imaging import check_gray

_GREEN = np.array([0.0, 255.0, 0.0])
_RED = np.array([255.0, 0.0, 0.0])


@dataclass(frozen=True)
class LimeParams:
    grid: int = 8
    num_samples: int = 1000
    kernel_width: float = 0.25
    ridge_lambda: float = 1.0
    top_k: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.grid < 2:
            raise ValueError(f"grid must be >= 2, got {self.grid}")
        if self.num_samples < 2:
            raise ValueError(f"num_samples must be >= 2, got {self.num_samples}")
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")
        if self.ridge_lambda < 0:
            raise ValueError("ridge_lambda must be >= 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class SuperpixelMap:
    width: int
    height: int
    segment_id: np.ndarray  # (height, width) int, row-major grid ids
    num_segments: int


@dataclass(frozen=True)
class PerturbationBatch:
    masks: np.ndarray  # (n, num_segments) in {0, 1}, row 0 all ones
    seed: int


@dataclass(frozen=True)
class Explanation:
    class_id: int
    segment_weights: np.ndarray
    intercept: float
    kernel_width: float
    fidelity_r2: float
    num_samples: int


def segment(img: np.ndarray, grid: int = 8) -> SuperpixelMap:
    """Partition into grid x grid rectangles; remainders go to the last
    row/column band (65 px over 8 bands -> seven 8s then one 9)."""
    img = check_gray(img)
    h, w = img.shape
    if grid < 2:
        raise ValueError(f"grid must be >= 2, got {grid}")
    if grid > min(h, w):
        raise ValueError(f"grid {grid} exceeds image side {min(h, w)}")
    row_edges = [(i * h) // grid for i in range(grid + 1)]
    col_edges = [(i * w) // grid for i in range(grid + 1)]
    ids = np.zeros((h, w), dtype=np.int64)
    for r in range(grid):
        for c in range(grid):
            ids[row_edges[r] : row_edges[r + 1], col_edges[c] : col_edges[c + 1]] = (
                r * grid + c
            )
    return SuperpixelMap(width=w, height=h, segment_id=ids, num_segments=grid * grid)


def sample_perturbations(n: int, k: int, seed: int = 0) -> PerturbationBatch:
    """Row 0 keeps every segment on; the rest are Bernoulli(0.5)."""
    if n < 2:
        raise ValueError(f"need at least 2 perturbations, got {n}")
    if k < 1:
        raise ValueError(f"need at least 1 segment, got {k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    masks = np.ones((n, k), dtype=np.int64)
    masks[1:] = rng.integers(0, 2, size=(n - 1, k))
    return PerturbationBatch(masks=masks, seed=seed)


def apply_mask(
    img: np.ndarray, seg: SuperpixelMap, mask: np.ndarray, baseline: str = "mean"
) -> np.ndarray:
    img = check_gray(img)
    mask = np.asarray(mask)
    if mask.shape != (seg.num_segments,):
        raise ValueError(
            f"mask length {mask.shape} does not match {seg.num_segments} segments"
        )
    if baseline != "mean":
        raise ValueError(f"unknown baseline fill rule {baseline!r}")
    out = img.copy()
    off = np.flatnonzero(mask == 0)
    if off.size:
        out[np.isin(seg.segment_id, off)] = img.mean()
    return out


def kernel_weight(mask: np.ndarray, width: float = 0.25) -> float:
    """exp(-d^2 / width^2), d = cosine distance to the all-ones mask.

    The zero mask has no direction; its distance is defined as 1.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.size == 0:
        raise ValueError("mask must be non-empty")
    on = mask.sum()
    if on == 0.0:
        d = 1.0
    else:
        # binary mask vs ones: cos = sum / (sqrt(sum) * sqrt(k)) = sqrt(sum / k)
        d = 1.0 - float(np.sqrt(on / mask.size))
    return float(np.exp(-(d * d) / (width * width)))


def fit_surrogate(
    batch: PerturbationBatch,
    preds: np.ndarray,
    weights: np.ndarray,
    target: int,
    ridge_lambda: float = 1.0,
    kernel_width: float = 0.25,
) -> Explanation:
    """Weighted ridge fit of the target-class score against the masks.

    Minimizes sum_i w_i (f_i - b0 - b.m_i)^2 + lambda ||b||^2 with the
    intercept unpenalized. kernel_width is recorded for provenance only.
    """
    masks = np.asarray(batch.masks, dtype=np.float64)
    preds = np.asarray(preds, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n, k = masks.shape
    if preds.shape[0] != n:
        raise ValueError(f"{preds.shape[0]} predictions for {n} masks")
    if weights.shape != (n,):
        raise ValueError(f"expected {n} row weights, got shape {weights.shape}")
    if ridge_lambda < 0:
        raise ValueError("ridge lambda must be >= 0")
    f = preds[:, target]
    design = np.hstack([np.ones((n, 1)), masks])
    wd = design * weights[:, None]
    normal = design.T @ wd
    reg = np.eye(k + 1) * ridge_lambda
    reg[0, 0] = 0.0  # intercept is not shrunk
    rhs = wd.T @ f
    try:
        beta = np.linalg.solve(normal + reg, rhs)
    except np.linalg.LinAlgError:
        raise ValueError(
            "singular normal equations; pass ridge_lambda > 0 to regularize"
        ) from None
    fitted = design @ beta
    total_w = weights.sum()
    f_bar = float((weights * f).sum() / total_w) if total_w > 0 else 0.0
    ss_res = float((weights * (f - fitted) ** 2).sum())
    ss_tot = float((weights * (f - f_bar) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return Explanation(
        class_id=int(target),
        segment_weights=beta[1:],
        intercept=float(beta[0]),
        kernel_width=kernel_width,
        fidelity_r2=r2,
        num_samples=n,
    )


def _masked_stack(img, seg, batch):
    fill = img.mean()
    stack = np.repeat(img[None, :, :], batch.masks.shape[0], axis=0)
    for r, mask in enumerate(batch.masks):
        off = np.flatnonzero(mask == 0)
        if off.size:
            stack[r][np.isin(seg.segment_id, off)] = fill
    return stack


def explain_instance(
    img: np.ndarray,
    predict_fn,
    target: int,
    params: LimeParams = LimeParams(),
) -> Explanation:
    """One surrogate for one class. predict_fn maps (n, h, w) -> (n, classes)."""
    return explain_all(img, predict_fn, params, targets=(int(target),))[0]


def explain_all(
    img: np.ndarray,
    predict_fn,
    params: LimeParams = LimeParams(),
    targets=None,
) -> list[Explanation]:
    """Surrogates for several classes from a single perturbation batch."""
    img = check_gray(img)
    seg = segment(img, params.grid)
    batch = sample_perturbations(params.num_samples, seg.num_segments, params.seed)
    preds = np.asarray(predict_fn(_masked_stack(img, seg, batch)), dtype=np.float64)
    if preds.ndim != 2 or preds.shape[0] != batch.masks.shape[0]:
        raise ValueError(
            f"predict_fn returned shape {preds.shape}, expected "
            f"({batch.masks.shape[0]}, n_classes)"
        )
    weights = np.array([kernel_weight(m, params.kernel_width) for m in batch.masks])
    if targets is None:
        targets = range(preds.shape[1])
    return [
        fit_surrogate(
            batch, preds, weights, t, params.ridge_lambda, params.kernel_width
        )
        for t in targets
    ]


def render_overlay(
    img: np.ndarray, seg: SuperpixelMap, e: Explanation, top_k: int = 10
) -> np.ndarray:
    """Grayscale base with the top_k |weight| segments alpha-blended:
    positive weights green, negative red, zero-weight segments untouched.
    Returns (h, w, 3) uint8."""
    img = check_gray(img)
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    w = np.asarray(e.segment_weights, dtype=np.float64)
    if w.shape != (seg.num_segments,):
        raise ValueError(
            f"{w.shape[0]} weights for {seg.num_segments} segments"
        )
    base = np.repeat(img[:, :, None], 3, axis=2)
    # stable order: by descending |weight|, ties broken by segment index
    order = np.lexsort((np.arange(w.size), -np.abs(w)))[:top_k]
    out = base.astype(np.float64)
    for s in order:
        if w[s] == 0.0:
            continue
        tint = _GREEN if w[s] > 0 else _RED
        region = seg.segment_id == s
        out[region] = 0.6 * out[region] + 0.4 * tint
    return quantize(out)
