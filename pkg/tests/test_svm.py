"""SMO solver against a projected-gradient QP oracle, plus model contracts."""
import hashlib

import numpy as np
import pytest

from cxrpipe.classifiers import KernelSpec, predict_svm, train_svm
from cxrpipe.classifiers.svm import kernel_matrix, kkt_residual, smo_solve


def project_simplex_box(v, y, C):
    """Project v onto {0 <= a <= C, y.a = 0} by bisection on the multiplier."""
    def g(nu):
        return np.clip(v - nu * y, 0.0, C) @ y

    lo, hi = -1e6, 1e6
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(v - 0.5 * (lo + hi) * y, 0.0, C)


def qp_oracle(K, y, C, iters=200000):
    """Projected-gradient solver for the SVM dual; independent of SMO."""
    n = y.size
    Q = (y[:, None] * y[None, :]) * K
    step = 1.0 / max(np.linalg.eigvalsh(Q).max(), 1e-9)
    alpha = project_simplex_box(np.zeros(n), y, C)
    for _ in range(iters):
        grad = Q @ alpha - 1.0
        new = project_simplex_box(alpha - step * grad, y, C)
        if np.abs(new - alpha).max() < 1e-14:
            alpha = new
            break
        alpha = new
    g = (alpha * y) @ K
    free = (alpha > 1e-7 * C) & (alpha < C * (1 - 1e-7))
    if free.any():
        b = float(np.mean(y[free] - g[free]))
    else:
        lo, hi = -np.inf, np.inf
        for i in range(n):
            if alpha[i] <= 1e-7 * C:
                if y[i] > 0:
                    lo = max(lo, 1 - g[i])
                else:
                    hi = min(hi, -(1 + g[i]))
            elif alpha[i] >= C * (1 - 1e-7):
                if y[i] > 0:
                    hi = min(hi, 1 - g[i])
                else:
                    lo = max(lo, -(1 + g[i]))
        if np.isfinite(lo) and np.isfinite(hi):
            b = 0.5 * (lo + hi)
        else:
            b = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
    return alpha, float(b)


# -- smo_solve vs oracle -------------------------------------------------------

def test_smo_matches_qp_oracle():
    rng = np.random.Generator(np.random.PCG64(2024))
    spec = KernelSpec(kind="rbf", gamma=0.5)
    C = 10.0
    for trial in range(10):
        X = rng.normal(size=(6, 2))
        y = np.where(rng.random(6) < 0.5, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
        K = kernel_matrix(spec, X, X)
        a_smo, b_smo = smo_solve(K, y, C, seed=trial)
        a_qp, b_qp = qp_oracle(K, y, C)
        f_smo = (a_smo * y) @ K + b_smo
        f_qp = (a_qp * y) @ K + b_qp
        assert np.abs(f_smo - f_qp).max() < 1e-3, f"trial {trial}"


def test_smo_dual_feasibility():
    rng = np.random.Generator(np.random.PCG64(77))
    spec = KernelSpec(kind="rbf", gamma=0.5)
    for trial in range(5):
        X = rng.normal(size=(12, 3))
        y = np.where(rng.random(12) < 0.5, 1.0, -1.0)
        if np.all(y == y[0]):
            y[0] = -y[0]
        K = kernel_matrix(spec, X, X)
        alpha, b = smo_solve(K, y, 5.0, seed=trial)
        assert abs(alpha @ y) < 1e-6
        assert alpha.min() >= -1e-12
        assert alpha.max() <= 5.0 + 1e-12


# -- kernels --------------------------------------------------------------------

def test_linear_kernel_is_gram():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    K = kernel_matrix(KernelSpec(kind="linear"), A, A)
    np.testing.assert_allclose(K, A @ A.T, atol=1e-12)


def test_rbf_kernel_diagonal_ones():
    X = np.random.default_rng(0).normal(size=(5, 4))
    K = kernel_matrix(KernelSpec(kind="rbf", gamma=0.7), X, X)
    np.testing.assert_allclose(np.diag(K), 1.0, atol=1e-12)
    assert K.max() <= 1.0 + 1e-12


def test_kernel_rejects_unknown_kind():
    with pytest.raises(ValueError):
        kernel_matrix(KernelSpec(kind="poly"), np.ones((2, 2)), np.ones((2, 2)))


# -- train_svm -------------------------------------------------------------------

def separable_toy(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    X[:, 0] += np.where(np.arange(n) % 2 == 0, 2.5, -2.5)
    y = (X[:, 0] > 0).astype(int)
    return X, y


def test_separable_linear_toy():
    X, y = separable_toy()
    model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="linear"))
    pred = [predict_svm(model, x).label for x in X]
    assert np.mean(np.array(pred) == y) == 1.0


def test_separable_kkt_residual():
    X, y = separable_toy(seed=1)
    spec = KernelSpec(kind="linear")
    K = kernel_matrix(spec, X, X)
    for cls in (0, 1):
        y_bin = np.where(y == cls, 1.0, -1.0)
        alpha, b = smo_solve(K, y_bin, 10.0, seed=cls)
        assert kkt_residual(K, y_bin, alpha, b, 10.0) < 1e-3


def test_xor_rbf():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
    pred = [predict_svm(model, x).label for x in X]
    assert list(pred) == list(y)


def test_pruned_support_vectors_match_full_expansion():
    X, y = separable_toy(seed=2)
    spec = KernelSpec(kind="rbf", gamma=0.5)
    model = train_svm(X, y, C=5.0, kernel=spec, seed=3)
    K = kernel_matrix(spec, X, X)
    for k, cls in enumerate(model.classes):
        y_bin = np.where(y == cls, 1.0, -1.0)
        alpha, b = smo_solve(K, y_bin, 5.0, seed=3 + k)
        full = (alpha * y_bin) @ K + b
        stored = model.machines[k].decision(spec, X)
        np.testing.assert_allclose(stored, full, atol=1e-9)


def test_symmetric_two_class_scores_half():
    X = np.array([[-1.0, 0.0], [1.0, 0.0], [-2.0, 0.0], [2.0, 0.0]])
    y = np.array([0, 1, 0, 1])
    model = train_svm(X, y, C=10.0, kernel=KernelSpec(kind="rbf", gamma=0.5))
    pred = predict_svm(model, np.zeros(2))
    np.testing.assert_allclose(pred.scores, [0.5, 0.5], atol=1e-3)


def test_prediction_scores_sum_to_one():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 4, size=30)
    model = train_svm(X, y, C=1.0)
    for x in X[:5]:
        pred = predict_svm(model, x)
        assert pred.scores.sum() == pytest.approx(1.0, abs=1e-6)
        assert pred.scores.min() >= 0.0
        assert pred.label == model.classes[np.argmax(pred.scores)]


def test_train_deterministic():
    X, y = separable_toy(seed=5)

    def digest(m):
        h = hashlib.sha256()
        for machine in m.machines:
            h.update(machine.support_vectors.tobytes())
            h.update(machine.dual_coef.tobytes())
            h.update(np.float64(machine.bias).tobytes())
        return h.hexdigest()

    a = train_svm(X, y, C=2.0, seed=11)
    b = train_svm(X, y, C=2.0, seed=11)
    assert digest(a) == digest(b)


def test_train_rejects_single_class():
    X = np.ones((4, 2))
    with pytest.raises(ValueError, match="2 classes"):
        train_svm(X, np.zeros(4, dtype=int))


def test_train_rejects_nonpositive_c():
    X, y = separable_toy()
    with pytest.raises(ValueError, match="C must be"):
        train_svm(X, y, C=0.0)
