"""SMOTE oversampling in feature space with exact per-class target counts.

Synthetic rows interpolate between a uniformly drawn seed sample and one
of its k nearest same-class neighbors: x + lam * (x_n - x), lam ~ U[0, 1),
one lam per synthetic row. Original rows are preserved verbatim and come
first; synthetic rows follow, grouped by class in label order.

Oversampling runs on the training split only. Resampling before the split
would leak synthetic kin of training samples into validation and test.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import ClassLabel, class_from_name
from .errors import DataError

logger = logging.getLogger(__name__)

PRESETS = ("off", "smote1", "smote2")

# Per-class targets used in the source study, defined on the full corpus.
_ABSOLUTE_TARGETS = {"smote1": 1200, "smote2": 1500}
# smote2 raises every class 25% above the majority; preserved when scaling
# presets to a split.
_PRESET_RATIO = {"smote1": 1.0, "smote2": 1.25}


@dataclass(frozen=True)
class SamplingStrategy:
    """Desired per-class sample counts; oversampling only."""

    targets: dict[ClassLabel, int]


@dataclass(frozen=True)
class SmoteParams:
    k_neighbors: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k_neighbors < 1:
            raise ValueError(f"k_neighbors must be >= 1, got {self.k_neighbors}")


@dataclass(frozen=True)
class SyntheticProvenance:
    """How one synthetic row was generated, for invariant checking."""

    label: ClassLabel
    seed_row: int  # index into the original matrix
    neighbor_row: int
    lam: float


def k_nearest_same_class(X_c: np.ndarray, i: int, k: int) -> np.ndarray:
    """Indices of the k nearest rows to row i (Euclidean), excluding i.

    Ties break toward the lower index.
    """
    X_c = np.asarray(X_c, dtype=np.float64)
    n = X_c.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 rows, got {n}")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must be in [1, {n - 1}], got {k}")
    if not 0 <= i < n:
        raise ValueError(f"row index {i} out of range for {n} rows")
    diff = X_c - X_c[i]
    dist = np.sqrt(np.sum(diff * diff, axis=1))
    dist[i] = np.inf
    order = np.argsort(dist, kind="stable")
    return order[:k]


def _neighbor_table(X_c: np.ndarray, k: int) -> np.ndarray:
    """(n, k) nearest-neighbor indices for every row, same tie rule."""
    sq = np.sum(X_c * X_c, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X_c @ X_c.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def fit_resample(
    X: np.ndarray,
    y: np.ndarray,
    strategy: SamplingStrategy,
    params: SmoteParams = SmoteParams(),
    with_provenance: bool = False,
):
    """Oversample (X, y) to the strategy's exact per-class counts.

    Returns (X_out, y_out), or (X_out, y_out, provenance) when
    with_provenance is set. Deterministic for a fixed seed: classes are
    processed in label order, and each class draws its seed rows, neighbor
    picks and interpolation factors as three batched calls on one PCG64
    stream.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} do not align")

    rng = np.random.Generator(np.random.PCG64(params.seed))
    synth_blocks: list[np.ndarray] = []
    synth_labels: list[np.ndarray] = []
    provenance: list[SyntheticProvenance] = []

    for label in ClassLabel:
        if label not in strategy.targets:
            continue
        target = int(strategy.targets[label])
        rows = np.flatnonzero(y == label)
        count = rows.size
        if target < count:
            raise DataError(
                f"target {target} for class {label.name} is below its current "
                f"count {count}; this resampler only oversamples"
            )
        need = target - count
        if need == 0:
            continue
        if count < 2:
            raise DataError(
                f"class {label.name} has {count} sample(s); need at least 2 "
                "to interpolate synthetic rows"
            )
        k = params.k_neighbors
        if k > count - 1:
            logger.warning(
                "class %s has %d samples; clipping k_neighbors from %d to %d",
                label.name, count, k, count - 1,
            )
            k = count - 1

        X_c = X[rows]
        neighbors = _neighbor_table(X_c, k)
        seed_idx = rng.integers(0, count, size=need)
        pick = rng.integers(0, k, size=need)
        lam = rng.random(need)

        neighbor_idx = neighbors[seed_idx, pick]
        base = X_c[seed_idx]
        block = base + lam[:, None] * (X_c[neighbor_idx] - base)
        synth_blocks.append(block)
        synth_labels.append(np.full(need, int(label), dtype=np.int64))
        if with_provenance:
            provenance.extend(
                SyntheticProvenance(
                    label=label,
                    seed_row=int(rows[s]),
                    neighbor_row=int(rows[nb]),
                    lam=float(lv),
                )
                for s, nb, lv in zip(seed_idx, neighbor_idx, lam)
            )

    if synth_blocks:
        X_out = np.vstack([X] + synth_blocks)
        y_out = np.concatenate([y] + synth_labels)
    else:
        X_out = X.copy()
        y_out = y.copy()
    if with_provenance:
        return X_out, y_out, provenance
    return X_out, y_out


def preset_targets(
    preset: str,
    class_counts: dict[ClassLabel, int],
    absolute: bool = False,
) -> SamplingStrategy:
    """Materialize a named preset into per-class targets.

    With absolute=True the presets use the study's full-corpus numbers
    (1200, then 1500, per class). Otherwise they scale to the data at
    hand: smote1 balances every class to the majority count; smote2 to
    1.25x the majority, preserving the 1500/1200 ratio.
    """
    if preset not in _ABSOLUTE_TARGETS:
        raise ValueError(f"unknown preset {preset!r}, expected smote1 or smote2")
    present = {c: n for c, n in class_counts.items() if n > 0}
    if not present:
        raise DataError("cannot build a sampling strategy for empty data")
    if absolute:
        target = _ABSOLUTE_TARGETS[preset]
    else:
        target = int(round(_PRESET_RATIO[preset] * max(present.values())))
    return SamplingStrategy(targets={c: target for c in present})


def parse_strategy_spec(
    spec: str, class_counts: dict[ClassLabel, int]
) -> SamplingStrategy:
    """Parse 'all=1500' or 'normal=1200,covid=1200,...' into a strategy."""
    targets: dict[ClassLabel, int] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ValueError(f"malformed strategy entry {part!r}, expected name=count")
        name, _, value = part.partition("=")
        try:
            count = int(value)
        except ValueError:
            raise ValueError(f"malformed target count {value!r} in {part!r}") from None
        if count < 1:
            raise ValueError(f"target count must be >= 1, got {count}")
        if name.strip().lower() == "all":
            for c, n in class_counts.items():
                if n > 0:
                    targets[c] = count
        else:
            targets[class_from_name(name)] = count
    if not targets:
        raise ValueError(f"empty strategy spec {spec!r}")
    return SamplingStrategy(targets=targets)
