"""Random forest of Gini-impurity decision trees, grown from scratch.

Each tree trains on a seeded bootstrap sample (tree RNGs are spawned from
the forest seed, so trees are independent and the whole forest is
reproducible). Splits are chosen greedily over a random feature subset by
weighted child Gini; candidate thresholds are midpoints between
consecutive distinct sorted values. Leaves keep raw class-count vectors;
prediction averages the per-tree leaf distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import prediction_from_scores

_NO_FEATURE = -1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None  # None = unlimited
    min_leaf: int = 1
    max_features: int | str = "sqrt"  # "sqrt", "all", or an explicit count
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_leaf < 1:
            raise ValueError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")

    def resolve_max_features(self, dim: int) -> int:
        if self.max_features == "sqrt":
            return int(np.ceil(np.sqrt(dim)))
        if self.max_features == "all":
            return dim
        m = int(self.max_features)
        if not 1 <= m <= dim:
            raise ValueError(f"max_features {m} out of range [1, {dim}]")
        return m


@dataclass
class Tree:
    """Flat array representation; children of a leaf are -1."""

    feature: np.ndarray  # (nodes,) int, -1 at leaves
    threshold: np.ndarray  # (nodes,) float
    left: np.ndarray  # (nodes,) int node index
    right: np.ndarray  # (nodes,) int node index
    counts: np.ndarray  # (nodes, n_classes) float, class counts at the node

    def leaf_for(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] != _NO_FEATURE:
            node = self.left[node] if x[self.feature[node]] < self.threshold[node] else self.right[node]
        return int(node)


@dataclass(frozen=True)
class ForestModel:
    classes: np.ndarray
    trees: tuple[Tree, ...]
    params: ForestParams
    n_features: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected (n, {self.n_features}) features, got shape {X.shape}"
            )
        out = np.zeros((X.shape[0], self.classes.size))
        for tree in self.trees:
            for r in range(X.shape[0]):
                node = tree.leaf_for(X[r])
                counts = tree.counts[node]
                out[r] += counts / counts.sum()
        return out / len(self.trees)


def gini(counts: np.ndarray) -> float:
    """Gini impurity 1 - sum(p^2) of a class-count vector."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _best_split(
    X: np.ndarray,
    y_codes: np.ndarray,
    rows: np.ndarray,
    n_classes: int,
    feature_pool: np.ndarray,
    min_leaf: int,
) -> tuple[int, float] | None:
    """Best (feature, threshold) by weighted child Gini, or None."""
    n = rows.size
    best_cost = np.inf
    best: tuple[int, float] | None = None
    labels = y_codes[rows]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0

    for feat in feature_pool:
        values = X[rows, feat]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        # prefix[i] = class counts of the i smallest samples
        prefix = np.cumsum(onehot[order], axis=0)
        total = prefix[-1]

        cut = np.arange(min_leaf, n - min_leaf + 1)  # left sizes to consider
        if cut.size == 0:
            continue
        cut = cut[sv[cut - 1] < sv[cut]]  # threshold needs distinct neighbors
        if cut.size == 0:
            continue
        left = prefix[cut - 1]
        right = total - left
        nl = cut.astype(np.float64)
        nr = n - nl
        gini_l = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
        cost = (nl * gini_l + nr * gini_r) / n
        k = int(np.argmin(cost))
        if cost[k] < best_cost:
            best_cost = cost[k]
            a, b = sv[cut[k] - 1], sv[cut[k]]
            thr = (a + b) / 2.0
            if thr <= a:  # midpoint rounded onto the lower value
                thr = b
            best = (int(feat), float(thr))
    return best


def _grow_tree(
    X: np.ndarray,
    y_codes: np.ndarray,
    rows: np.ndarray,
    n_classes: int,
    params: ForestParams,
    rng: np.random.Generator,
) -> Tree:
    dim = X.shape[1]
    m = params.resolve_max_features(dim)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def make_node(node_rows: np.ndarray, depth: int) -> int:
        idx = len(feature)
        feature.append(_NO_FEATURE)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        node_counts = np.bincount(y_codes[node_rows], minlength=n_classes).astype(np.float64)
        counts.append(node_counts)

        pure = np.count_nonzero(node_counts) <= 1
        depth_capped = params.max_depth is not None and depth >= params.max_depth
        too_small = node_rows.size < 2 * params.min_leaf
        if pure or depth_capped or too_small:
            return idx
        pool = rng.choice(dim, size=m, replace=False) if m < dim else np.arange(dim)
        split = _best_split(X, y_codes, node_rows, n_classes, pool, params.min_leaf)
        if split is None:
            return idx
        feat, thr = split
        goes_left = X[node_rows, feat] < thr
        feature[idx] = feat
        threshold[idx] = thr
        left[idx] = make_node(node_rows[goes_left], depth + 1)
        right[idx] = make_node(node_rows[~goes_left], depth + 1)
        return idx

    make_node(rows, 0)
    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=np.float64),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.vstack(counts),
    )


def train_forest(
    X: np.ndarray, y: np.ndarray, params: ForestParams = ForestParams()
) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} do not align")
    if X.shape[0] == 0:
        raise ValueError("cannot train a forest on empty input")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or Inf")

    classes = np.unique(y)
    code_of = {int(c): k for k, c in enumerate(classes)}
    y_codes = np.array([code_of[int(v)] for v in y], dtype=np.int64)
    n = X.shape[0]

    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    for t in range(params.n_trees):
        rng = np.random.Generator(np.random.PCG64(seeds[t]))
        rows = rng.integers(0, n, size=n) if params.bootstrap else np.arange(n)
        trees.append(_grow_tree(X, y_codes, rows, classes.size, params, rng))
    return ForestModel(
        classes=classes, trees=tuple(trees), params=params, n_features=X.shape[1]
    )


def predict_forest(model: ForestModel, x: np.ndarray):
    """Prediction for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise ValueError(
            f"expected a {model.n_features}-dim feature vector, got shape {x.shape}"
        )
    scores = model.predict_proba(x[None, :])[0]
    return prediction_from_scores(scores, model.classes)
