"""CNN shapes, finite-difference gradient checks, and training behavior."""
import hashlib

import numpy as np
import pytest

from cxrpipe.classifiers import CnnConfig, CnnModel, cnn_forward, cnn_train
from cxrpipe.classifiers.cnn import init_params, loss_and_gradients


def numeric_gradient(config, params, X, y, name, h=1e-5):
    """Central finite differences on every entry of params[name]."""
    grad = np.zeros_like(params[name])
    flat = params[name].ravel()
    out = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi, _ = loss_and_gradients(config, params, X, y)
        flat[i] = orig - h
        lo, _ = loss_and_gradients(config, params, X, y)
        flat[i] = orig
        out[i] = (hi - lo) / (2.0 * h)
    return grad


def check_all_gradients(config, seed=0):
    rng = np.random.default_rng(seed)
    params = init_params(config)
    X = rng.uniform(0.0, 1.0, size=(2, config.input_side, config.input_side))
    y = np.array([0, config.n_classes - 1])
    _, analytic = loss_and_gradients(config, params, X, y)
    for name in sorted(params):
        numeric = numeric_gradient(config, params, X, y, name)
        rel = np.abs(analytic[name] - numeric) / (
            np.abs(analytic[name]) + np.abs(numeric) + 1e-8
        )
        assert rel.max() < 1e-4, f"{name}: worst rel {rel.max():.2e}"


def test_gradients_two_block_miniature():
    check_all_gradients(CnnConfig(input_side=16, channels=(3, 4), hidden=6))


def test_gradients_three_block_miniature():
    check_all_gradients(CnnConfig(input_side=22, channels=(2, 3, 4), hidden=4))


# -- shapes --------------------------------------------------------------------

def test_feature_map_chain_at_64():
    config = CnnConfig()
    assert config.feature_map_sides() == [31, 14, 6]
    assert config.flat_dim() == 6 * 6 * 32 == 1152


def test_config_rejects_too_deep_stack():
    with pytest.raises(ValueError):
        CnnConfig(input_side=16, channels=(8, 16, 32)).feature_map_sides()


def test_zero_params_uniform_scores():
    config = CnnConfig(input_side=16, channels=(2, 3), hidden=4)
    params = {k: np.zeros_like(v) for k, v in init_params(config).items()}
    model = CnnModel(config=config, params=params)
    proba = model.predict_proba(np.zeros((3, 16, 16)))
    np.testing.assert_allclose(proba, 0.25, atol=1e-12)


def test_bias_doubling_raises_class_score():
    config = CnnConfig(input_side=16, channels=(2, 3), hidden=4, seed=3)
    params = init_params(config)
    model = CnnModel(config=config, params=params)
    x = np.random.default_rng(0).uniform(size=(1, 16, 16))
    before = model.predict_proba(x)[0]

    bumped = {k: v.copy() for k, v in params.items()}
    name = [k for k in bumped if k.startswith("out") and k.endswith("b")][0]
    bumped[name][2] = bumped[name][2] * 2 if bumped[name][2] != 0 else 0.5
    after = CnnModel(config=config, params=bumped).predict_proba(x)[0]
    assert after[2] > before[2]


def test_forward_shape_error_names_both_shapes():
    config = CnnConfig(input_side=16, channels=(2, 3), hidden=4)
    model = CnnModel(config=config, params=init_params(config))
    with pytest.raises(ValueError, match=r"16"):
        model.predict_proba(np.zeros((2, 32, 32)))


# -- training ------------------------------------------------------------------

def constant_class_toy(side=16, per_class=4):
    """Four constant-intensity levels, one per class: linearly separable."""
    levels = [0.1, 0.35, 0.65, 0.9]
    X = np.concatenate(
        [np.full((per_class, side, side), lv) for lv in levels]
    )
    y = np.repeat(np.arange(4), per_class)
    return X, y


def test_toy_training_learns():
    X, y = constant_class_toy()
    config = CnnConfig(
        input_side=16, channels=(2, 3), hidden=8,
        learning_rate=0.01, epochs=1500, batch_size=4, seed=0,
    )
    model = cnn_train(X, y, config)
    history = np.array(model.loss_history)
    assert history.shape == (1500,)
    # every later epoch stays at or below the first epoch's loss
    assert history[1:].max() <= history[0]
    proba = model.predict_proba(X)
    assert np.mean(np.argmax(proba, axis=1) == y) == 1.0


def test_zero_learning_rate_freezes_params():
    X, y = constant_class_toy()
    config = CnnConfig(
        input_side=16, channels=(2, 3), hidden=4,
        learning_rate=0.0, epochs=1, batch_size=4, seed=2,
    )
    before = init_params(config)
    model = cnn_train(X, y, config)
    for name, arr in model.params.items():
        np.testing.assert_array_equal(arr, before[name])


def test_nan_input_aborts_with_location():
    X, y = constant_class_toy()
    X = X.copy()
    X[0, 0, 0] = np.nan
    config = CnnConfig(
        input_side=16, channels=(2, 3), hidden=4, epochs=2, batch_size=16, seed=0,
    )
    with pytest.raises(RuntimeError, match=r"epoch 0.*batch 0"):
        cnn_train(X, y, config)


def test_train_deterministic():
    X, y = constant_class_toy()
    config = CnnConfig(
        input_side=16, channels=(2, 3), hidden=4, epochs=3, batch_size=8, seed=7,
    )

    def digest(model):
        h = hashlib.sha256()
        for name in sorted(model.params):
            h.update(model.params[name].tobytes())
        return h.hexdigest()

    assert digest(cnn_train(X, y, config)) == digest(cnn_train(X, y, config))


def test_train_rejects_out_of_range_labels():
    X = np.zeros((4, 16, 16))
    config = CnnConfig(input_side=16, channels=(2, 3), hidden=4, n_classes=4)
    with pytest.raises(ValueError):
        cnn_train(X, np.array([0, 1, 2, 7]), config)


def test_forward_prediction_contract():
    config = CnnConfig(input_side=16, channels=(2, 3), hidden=4, seed=5)
    model = CnnModel(config=config, params=init_params(config))
    pred = cnn_forward(model, np.random.default_rng(1).uniform(size=(16, 16)))
    assert pred.scores.shape == (4,)
    assert pred.scores.sum() == pytest.approx(1.0, abs=1e-9)
    assert pred.label == int(np.argmax(pred.scores))
