"""One-vs-rest SVM trained by simplified sequential minimal optimization.

Each binary machine solves the usual dual

    max  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum_i a_i y_i = 0

by repeatedly picking a KKT-violating index and a random partner,
optimizing the pair analytically. The pairwise update keeps sum(a * y) = 0
exactly. Training stops when no KKT violation exceeds the tolerance, or
after a run of passes that change nothing.

Multi-class probabilities come from a softmax over the per-class decision
values, the simplest calibration consistent with a 4-way output.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..dataset import ClassLabel
from . import prediction_from_scores, softmax

logger = logging.getLogger(__name__)

_SV_THRESHOLD = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    """'linear' or 'rbf'; gamma (RBF width) defaults to 1/dim when None."""

    kind: str = "rbf"
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"kernel gamma must be > 0, got {self.gamma}")

    def resolve_gamma(self, dim: int) -> float:
        return self.gamma if self.gamma is not None else 1.0 / dim


def kernel_matrix(spec: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Gram matrix K[i, j] = K(A[i], B[j])."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if spec.kind == "linear":
        return A @ B.T
    gamma = spec.resolve_gamma(A.shape[1])
    sq_a = np.sum(A * A, axis=1)
    sq_b = np.sum(B * B, axis=1)
    d2 = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


@dataclass(frozen=True)
class BinarySvm:
    """One trained binary machine: decision(x) = sum a_i y_i K(x_i, x) + b."""

    support_vectors: np.ndarray
    dual_coef: np.ndarray  # a_i * y_i for retained support vectors
    bias: float

    def decision(self, spec: KernelSpec, X: np.ndarray) -> np.ndarray:
        if self.support_vectors.shape[0] == 0:
            return np.full(X.shape[0], self.bias)
        K = kernel_matrix(spec, X, self.support_vectors)
        return K @ self.dual_coef + self.bias


@dataclass(frozen=True)
class SvmModel:
    classes: np.ndarray
    machines: tuple[BinarySvm, ...]
    kernel: KernelSpec
    C: float
    n_features: int

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(
                f"expected (n, {self.n_features}) features, got shape {X.shape}"
            )
        return np.column_stack([m.decision(self.kernel, X) for m in self.machines])

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.decision_values(X), axis=1)


def smo_solve(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = 1e-3,
    max_idle_passes: int = 200,
    max_passes: int = 5000,
    seed: int = 0,
) -> tuple[np.ndarray, float]:
    """Solve the dual given a precomputed Gram matrix; returns (alpha, b).

    y must be +-1. The random partner index draws from a PCG64 stream
    seeded by `seed`, so training is reproducible.
    """
    K = np.asarray(K, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    rng = np.random.Generator(np.random.PCG64(seed))

    alpha = np.zeros(n)
    b = 0.0
    f = np.zeros(n)  # current decision values over the training set

    idle = 0
    for _ in range(max_passes):
        changed = 0
        margins = y * f
        # KKT at tolerance: a=0 wants margin >= 1, a=C wants margin <= 1,
        # interior wants margin == 1.
        violating = ((alpha < C) & (margins < 1 - tol)) | (
            (alpha > 0) & (margins > 1 + tol)
        )
        if not violating.any():
            return alpha, b
        for i in np.flatnonzero(violating):
            m_i = y[i] * f[i]
            if not (
                (alpha[i] < C and m_i < 1 - tol) or (alpha[i] > 0 and m_i > 1 + tol)
            ):
                continue  # an earlier pair update fixed this index
            j = int(rng.integers(0, n - 1))
            if j >= i:
                j += 1
            eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if eta <= 1e-12:
                continue
            e_i = f[i] - y[i]
            e_j = f[j] - y[j]
            a_j_new = alpha[j] + y[j] * (e_i - e_j) / eta
            if y[i] == y[j]:
                lo = max(0.0, alpha[i] + alpha[j] - C)
                hi = min(C, alpha[i] + alpha[j])
            else:
                lo = max(0.0, alpha[j] - alpha[i])
                hi = min(C, C + alpha[j] - alpha[i])
            if lo >= hi:
                continue
            a_j_new = min(max(a_j_new, lo), hi)
            d_j = a_j_new - alpha[j]
            if abs(d_j) < 1e-12:
                continue
            d_i = -y[i] * y[j] * d_j
            a_i_new = alpha[i] + d_i

            b1 = b - e_i - y[i] * d_i * K[i, i] - y[j] * d_j * K[i, j]
            b2 = b - e_j - y[i] * d_i * K[i, j] - y[j] * d_j * K[j, j]
            if 0.0 < a_i_new < C:
                b_new = b1
            elif 0.0 < a_j_new < C:
                b_new = b2
            else:
                b_new = (b1 + b2) / 2.0

            f += y[i] * d_i * K[i] + y[j] * d_j * K[j] + (b_new - b)
            alpha[i] = a_i_new
            alpha[j] = a_j_new
            b = b_new
            changed += 1
        if changed == 0:
            idle += 1
            if idle >= max_idle_passes:
                logger.warning(
                    "SMO stopped after %d passes without progress", max_idle_passes
                )
                return alpha, b
        else:
            idle = 0
    logger.warning("SMO hit the absolute pass limit (%d)", max_passes)
    return alpha, b


def kkt_residual(K: np.ndarray, y: np.ndarray, alpha: np.ndarray, b: float, C: float) -> float:
    """Largest KKT violation over the training set (0 when fully optimal)."""
    f = K @ (alpha * y) + b
    margins = y * f
    at_lower = alpha <= _SV_THRESHOLD
    at_upper = alpha >= C - _SV_THRESHOLD
    interior = ~(at_lower | at_upper)
    viol = np.zeros_like(margins)
    viol[at_lower] = np.maximum(0.0, 1.0 - margins[at_lower])
    viol[at_upper] = np.maximum(0.0, margins[at_upper] - 1.0)
    viol[interior] = np.abs(margins[interior] - 1.0)
    return float(viol.max()) if viol.size else 0.0


def train_svm(
    X: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    kernel: KernelSpec = KernelSpec(),
    tol: float = 1e-3,
    seed: int = 0,
) -> SvmModel:
    """Train one-vs-rest binary machines, one per class present in y."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} do not align")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or Inf")
    if C <= 0:
        raise ValueError(f"C must be > 0, got {C}")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError(f"need at least 2 classes, got {classes.size}")

    K = kernel_matrix(kernel, X, X)
    machines = []
    for k, cls in enumerate(classes):
        y_bin = np.where(y == cls, 1.0, -1.0)
        alpha, b = smo_solve(K, y_bin, C, tol=tol, seed=seed + k)
        keep = alpha > _SV_THRESHOLD
        machines.append(
            BinarySvm(
                support_vectors=X[keep].copy(),
                dual_coef=(alpha * y_bin)[keep].copy(),
                bias=float(b),
            )
        )
    return SvmModel(
        classes=classes,
        machines=tuple(machines),
        kernel=kernel,
        C=float(C),
        n_features=X.shape[1],
    )


def predict_svm(model: SvmModel, x: np.ndarray):
    """Prediction for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise ValueError(
            f"expected a {model.n_features}-dim feature vector, got shape {x.shape}"
        )
    scores = model.predict_proba(x[None, :])[0]
    return prediction_from_scores(scores, model.classes)
