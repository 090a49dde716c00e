"""Gini trees and forest voting."""
import hashlib

import numpy as np
import pytest

from cxrpipe.classifiers import predict_forest, train_forest
from cxrpipe.classifiers.forest import ForestModel, ForestParams, Tree, gini


def test_gini_values():
    assert gini(np.array([2, 2])) == pytest.approx(0.5, abs=1e-12)
    assert gini(np.array([4, 0])) == pytest.approx(0.0, abs=1e-12)
    assert gini(np.array([0, 0])) == 0.0
    assert gini(np.array([1, 1, 1, 1])) == pytest.approx(0.75, abs=1e-12)


def test_single_tree_memorizes_distinct_points():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(24, 3))
    y = rng.integers(0, 4, size=24)
    params = ForestParams(n_trees=1, bootstrap=False, max_features="all", seed=1)
    model = train_forest(X, y, params)
    pred = [predict_forest(model, x).label for x in X]
    assert np.mean(np.array(pred) == y) == 1.0


def test_root_threshold_separates_signs():
    X = np.array([[-3.0], [-2.0], [-0.5], [0.25], [1.0], [2.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    params = ForestParams(n_trees=1, bootstrap=False, max_features="all", seed=0)
    model = train_forest(X, y, params)
    tree = model.trees[0]
    assert tree.feature[0] == 0
    assert -0.5 < tree.threshold[0] <= 0.25


def test_stored_leaf_counts_match_walk_oracle():
    """Every training row lands in a leaf; leaf count vectors must add up."""
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 4))
    y = rng.integers(0, 3, size=40)
    params = ForestParams(n_trees=1, bootstrap=False, max_features="all", seed=5)
    model = train_forest(X, y, params)
    tree = model.trees[0]

    recomputed = np.zeros_like(tree.counts)
    for x, label in zip(X, y):
        code = int(np.searchsorted(model.classes, label))
        recomputed[tree.leaf_for(x), code] += 1
    leaves = tree.feature == -1
    np.testing.assert_array_equal(recomputed[leaves], tree.counts[leaves])


def leaf_only_tree(counts):
    return Tree(
        feature=np.array([-1]),
        threshold=np.array([0.0]),
        left=np.array([-1]),
        right=np.array([-1]),
        counts=np.array([counts], dtype=np.float64),
    )


def test_two_tree_averaging():
    model = ForestModel(
        classes=np.array([0, 1]),
        trees=(leaf_only_tree([1.0, 0.0]), leaf_only_tree([0.0, 1.0])),
        params=ForestParams(n_trees=2),
        n_features=1,
    )
    pred = predict_forest(model, np.zeros(1))
    np.testing.assert_allclose(pred.scores, [0.5, 0.5], atol=1e-12)
    assert pred.label == 0  # tie resolves to the lowest class


def test_unanimous_trees_give_certainty():
    model = ForestModel(
        classes=np.array([0, 1]),
        trees=tuple(leaf_only_tree([3.0, 0.0]) for _ in range(5)),
        params=ForestParams(n_trees=5),
        n_features=2,
    )
    pred = predict_forest(model, np.zeros(2))
    np.testing.assert_allclose(pred.scores, [1.0, 0.0], atol=1e-12)


def test_forest_scores_sum_to_one():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 5))
    y = rng.integers(0, 4, size=30)
    model = train_forest(X, y, ForestParams(n_trees=7, seed=2))
    for x in X[:8]:
        pred = predict_forest(model, x)
        assert pred.scores.sum() == pytest.approx(1.0, abs=1e-9)
        assert pred.scores.min() >= 0.0


def test_forest_deterministic():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(25, 3))
    y = rng.integers(0, 3, size=25)

    def digest(model):
        h = hashlib.sha256()
        for t in model.trees:
            for arr in (t.feature, t.threshold, t.left, t.right, t.counts):
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    params = ForestParams(n_trees=11, seed=13)
    assert digest(train_forest(X, y, params)) == digest(train_forest(X, y, params))


def test_forest_seeds_differ():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(30, 3))
    y = rng.integers(0, 3, size=30)
    a = train_forest(X, y, ForestParams(n_trees=3, seed=0))
    b = train_forest(X, y, ForestParams(n_trees=3, seed=1))
    different = any(
        ta.feature.shape != tb.feature.shape or not np.array_equal(ta.counts, tb.counts)
        for ta, tb in zip(a.trees, b.trees)
    )
    assert different


def test_max_depth_limits_tree():
    rng = np.random.default_rng(11)
    X = rng.normal(size=(60, 2))
    y = rng.integers(0, 2, size=60)
    model = train_forest(
        X, y, ForestParams(n_trees=1, max_depth=1, bootstrap=False, max_features="all")
    )
    # depth 1: at most a root and two leaves
    assert model.trees[0].feature.size <= 3


def test_forest_rejects_misaligned_input():
    with pytest.raises(ValueError):
        train_forest(np.ones((4, 2)), np.zeros(3, dtype=int))
