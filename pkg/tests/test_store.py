"""MODL1 container: round trips, corruption detection, type pinning."""
import numpy as np
import pytest

from cxrpipe.classifiers import (
    CnnConfig,
    CnnModel,
    ForestParams,
    KernelSpec,
    cnn_train,
    load_model,
    predict_forest,
    predict_svm,
    save_model,
    train_forest,
    train_svm,
)
from cxrpipe.classifiers.cnn import init_params
from cxrpipe.errors import FormatError


@pytest.fixture(scope="module")
def small_data():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(24, 6))
    y = rng.integers(0, 4, size=24)
    return X, y


def test_svm_round_trip(tmp_path, small_data):
    X, y = small_data
    model = train_svm(X, y, C=2.0, kernel=KernelSpec(kind="rbf", gamma=0.3), seed=1)
    p = tmp_path / "svm.bin"
    save_model(model, p)
    back = load_model(p)
    for x in X[:6]:
        a, b = predict_svm(model, x), predict_svm(back, x)
        assert a.label == b.label
        np.testing.assert_array_equal(a.scores, b.scores)
    assert back.kernel == model.kernel
    assert back.C == model.C


def test_forest_round_trip(tmp_path, small_data):
    X, y = small_data
    model = train_forest(X, y, ForestParams(n_trees=5, seed=3))
    p = tmp_path / "forest.bin"
    save_model(model, p)
    back = load_model(p)
    for x in X[:6]:
        a, b = predict_forest(model, x), predict_forest(back, x)
        assert a.label == b.label
        np.testing.assert_array_equal(a.scores, b.scores)
    assert back.params == model.params


def test_cnn_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    X = rng.uniform(size=(8, 16, 16))
    y = rng.integers(0, 4, size=8)
    config = CnnConfig(input_side=16, channels=(2, 3), hidden=4, epochs=2,
                       batch_size=4, seed=5)
    model = cnn_train(X, y, config)
    p = tmp_path / "cnn.bin"
    save_model(model, p)
    back = load_model(p)
    assert back.config == model.config
    assert back.loss_history == model.loss_history
    np.testing.assert_array_equal(
        back.predict_proba(X), model.predict_proba(X)
    )


def test_meta_round_trip(tmp_path, small_data):
    X, y = small_data
    model = train_svm(X, y, C=1.0)
    p = tmp_path / "m.bin"
    meta = {"descriptor": "pixels/8x8", "note": 7}
    save_model(model, p, meta=meta)
    _, back = load_model(p, with_meta=True)
    assert back == meta


def test_load_truncated(tmp_path, small_data):
    X, y = small_data
    p = tmp_path / "m.bin"
    save_model(train_svm(X, y), p)
    p.write_bytes(p.read_bytes()[:40])
    with pytest.raises(FormatError):
        load_model(p)


def test_load_bad_magic(tmp_path):
    p = tmp_path / "m.bin"
    p.write_bytes(b"JUNK!" + bytes(64))
    with pytest.raises(FormatError, match="MODL1"):
        load_model(p)


def test_load_corrupted_digest(tmp_path, small_data):
    X, y = small_data
    p = tmp_path / "m.bin"
    save_model(train_svm(X, y), p)
    data = bytearray(p.read_bytes())
    data[len(data) // 2] ^= 0xFF
    p.write_bytes(bytes(data))
    with pytest.raises(FormatError, match="digest|checksum|corrupt"):
        load_model(p)


def test_load_trailing_garbage(tmp_path, small_data):
    X, y = small_data
    p = tmp_path / "m.bin"
    save_model(train_svm(X, y), p)
    p.write_bytes(p.read_bytes() + b"\x00")
    with pytest.raises(FormatError):
        load_model(p)


def test_type_mismatch_raises_type_error(tmp_path, small_data):
    X, y = small_data
    p = tmp_path / "svm.bin"
    save_model(train_svm(X, y), p)
    with pytest.raises(TypeError, match="forest"):
        load_model(p, expect="forest")


def test_expect_accepts_matching_kind(tmp_path, small_data):
    X, y = small_data
    p = tmp_path / "svm.bin"
    save_model(train_svm(X, y), p)
    model = load_model(p, expect="svm")
    assert model.n_features == X.shape[1]


def test_untrained_cnn_round_trip(tmp_path):
    config = CnnConfig(input_side=16, channels=(2, 2), hidden=3, seed=9)
    model = CnnModel(config=config, params=init_params(config))
    p = tmp_path / "raw.bin"
    save_model(model, p)
    back = load_model(p)
    for name in model.params:
        np.testing.assert_array_equal(back.params[name], model.params[name])
