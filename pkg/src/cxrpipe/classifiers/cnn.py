"""Small convolutional network trained by mini-batch SGD, all in numpy.

Architecture: a stack of (3x3 valid convolution, ReLU, 2x2 max-pool)
blocks, flatten, one dense ReLU layer, dense softmax output. Default is
three blocks with 8/16/32 channels on a 64x64 input; block count follows
the length of the channel tuple, and a 2x2 map after the last pool is
fine. Odd pool inputs drop their trailing row/column.

Backpropagation is exact: max-pool routes gradient to the first maximum
of each window and ReLU uses zero slope at the kink, so analytic
gradients match central finite differences wherever the loss is
differentiable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import prediction_from_scores, softmax

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CnnConfig:
    input_side: int = 64
    channels: tuple[int, ...] = (8, 16, 32)
    hidden: int = 64
    n_classes: int = 4
    learning_rate: float = 0.01
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_side < 8:
            raise ValueError(f"input_side must be >= 8, got {self.input_side}")
        if not self.channels:
            raise ValueError("need at least one conv block")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    def feature_map_sides(self) -> list[int]:
        """Spatial side after each conv+pool block; validates the chain."""
        side = self.input_side
        sides = []
        for i, _ in enumerate(self.channels):
            side = side - 2  # valid 3x3 convolution
            if side < 2:
                raise ValueError(
                    f"input_side {self.input_side} collapses at conv block "
                    f"{i}: {side + 2} -> {side} is too small to pool"
                )
            side //= 2
            sides.append(side)
        return sides

    def flat_dim(self) -> int:
        return self.feature_map_sides()[-1] ** 2 * self.channels[-1]


@dataclass
class CnnModel:
    config: CnnConfig
    params: dict[str, np.ndarray]
    loss_history: list[float] = field(default_factory=list)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = _check_batch(X, self.config.input_side)
        logits = _forward(self.config, self.params, X)[0]
        return softmax(logits, axis=1)

    @property
    def classes(self) -> np.ndarray:
        return np.arange(self.config.n_classes)


def _check_batch(X: np.ndarray, side: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None, :, :]
    if X.ndim != 3 or X.shape[1] != side or X.shape[2] != side:
        raise ValueError(
            f"expected tensors of shape (n, {side}, {side}), got {X.shape}"
        )
    return X


def init_params(config: CnnConfig) -> dict[str, np.ndarray]:
    """He-uniform weights, zero biases, from the config seed."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    params: dict[str, np.ndarray] = {}

    def he_uniform(shape: tuple[int, ...], fan_in: int) -> np.ndarray:
        limit = np.sqrt(6.0 / fan_in)
        return rng.uniform(-limit, limit, size=shape)

    c_in = 1
    for i, c_out in enumerate(config.channels):
        params[f"conv{i}_w"] = he_uniform((c_out, c_in, 3, 3), c_in * 9)
        params[f"conv{i}_b"] = np.zeros(c_out)
        c_in = c_out
    flat = config.flat_dim()
    params["dense_w"] = he_uniform((config.hidden, flat), flat)
    params["dense_b"] = np.zeros(config.hidden)
    params["out_w"] = he_uniform((config.n_classes, config.hidden), config.hidden)
    params["out_b"] = np.zeros(config.n_classes)
    return params


def _im2col(x: np.ndarray) -> np.ndarray:
    """(n, c, h, w) -> (n, c*9, ho*wo) of 3x3 patches."""
    n, c, h, w = x.shape
    windows = np.lib.stride_tricks.sliding_window_view(x, (3, 3), axis=(2, 3))
    # (n, c, ho, wo, 3, 3) -> (n, c, 3, 3, ho, wo)
    cols = windows.transpose(0, 1, 4, 5, 2, 3)
    return np.ascontiguousarray(cols).reshape(n, c * 9, (h - 2) * (w - 2))


def _conv_forward(x, w, b):
    n, c, h, w_ = x.shape
    f = w.shape[0]
    cols = _im2col(x)
    out = np.einsum("fk,nkl->nfl", w.reshape(f, -1), cols) + b[None, :, None]
    return out.reshape(n, f, h - 2, w_ - 2), cols


def _conv_backward(dout, cols, w, x_shape):
    n, c, h, w_ = x_shape
    f = w.shape[0]
    dflat = dout.reshape(n, f, -1)
    dw = np.einsum("nfl,nkl->fk", dflat, cols).reshape(w.shape)
    db = dflat.sum(axis=(0, 2))
    dcols = np.einsum("fk,nfl->nkl", w.reshape(f, -1), dflat)
    dcols = dcols.reshape(n, c, 3, 3, h - 2, w_ - 2)
    dx = np.zeros(x_shape)
    for ky in range(3):
        for kx in range(3):
            dx[:, :, ky : ky + h - 2, kx : kx + w_ - 2] += dcols[:, :, ky, kx]
    return dx, dw, db


def _pool_forward(x):
    n, c, h, w = x.shape
    ho, wo = h // 2, w // 2
    cropped = x[:, :, : ho * 2, : wo * 2]
    windows = cropped.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5)
    windows = windows.reshape(n, c, ho, wo, 4)
    arg = np.argmax(windows, axis=4)  # first maximum wins
    out = np.take_along_axis(windows, arg[..., None], axis=4)[..., 0]
    return out, arg


def _pool_backward(dout, arg, x_shape):
    n, c, h, w = x_shape
    ho, wo = h // 2, w // 2
    dwin = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(dwin, arg[..., None], dout[..., None], axis=4)
    dcrop = dwin.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(x_shape)
    dx[:, :, : ho * 2, : wo * 2] = dcrop.reshape(n, c, ho * 2, wo * 2)
    return dx


def _forward(config: CnnConfig, params: dict[str, np.ndarray], X: np.ndarray):
    """Returns (logits, cache) for a (n, side, side) batch."""
    a = X[:, None, :, :]
    cache: list = []
    for i in range(len(config.channels)):
        w, b = params[f"conv{i}_w"], params[f"conv{i}_b"]
        z, cols = _conv_forward(a, w, b)
        relu_mask = z > 0
        act = z * relu_mask
        pooled, arg = _pool_forward(act)
        cache.append((a.shape, cols, relu_mask, act.shape, arg))
        a = pooled
    flat_shape = a.shape
    flat = a.reshape(a.shape[0], -1)
    hidden_z = flat @ params["dense_w"].T + params["dense_b"]
    hidden_mask = hidden_z > 0
    hidden = hidden_z * hidden_mask
    logits = hidden @ params["out_w"].T + params["out_b"]
    cache.append((flat_shape, flat, hidden_mask, hidden))
    return logits, cache


def loss_and_gradients(
    config: CnnConfig,
    params: dict[str, np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    X = _check_batch(X, config.input_side)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    logits, cache = _forward(config, params, X)
    p = softmax(logits, axis=1)
    eps = np.finfo(np.float64).tiny
    loss = float(-np.mean(np.log(p[np.arange(n), y] + eps)))

    grads: dict[str, np.ndarray] = {}
    dlogits = p.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n

    flat_shape, flat, hidden_mask, hidden = cache[-1]
    grads["out_w"] = dlogits.T @ hidden
    grads["out_b"] = dlogits.sum(axis=0)
    dhidden = (dlogits @ params["out_w"]) * hidden_mask
    grads["dense_w"] = dhidden.T @ flat
    grads["dense_b"] = dhidden.sum(axis=0)
    da = (dhidden @ params["dense_w"]).reshape(flat_shape)

    for i in reversed(range(len(config.channels))):
        a_shape, cols, relu_mask, act_shape, arg = cache[i]
        dact = _pool_backward(da, arg, act_shape)
        dz = dact * relu_mask
        da, dw, db = _conv_backward(dz, cols, params[f"conv{i}_w"], a_shape)
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return loss, grads


def cnn_train(
    X: np.ndarray, y: np.ndarray, config: CnnConfig = CnnConfig()
) -> CnnModel:
    """Train on (n, side, side) tensors with integer labels.

    Per-epoch mean batch loss lands in the model's loss_history. A NaN
    loss aborts immediately, naming the epoch and batch.
    """
    X = _check_batch(X, config.input_side)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"tensors {X.shape} and labels {y.shape} do not align")
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty batch")
    if y.min() < 0 or y.max() >= config.n_classes:
        raise ValueError(f"labels out of range [0, {config.n_classes})")

    params = init_params(config)
    rng = np.random.Generator(np.random.PCG64(config.seed + 1))
    history: list[float] = []
    n = X.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            rows = order[start : start + config.batch_size]
            loss, grads = loss_and_gradients(config, params, X[rows], y[rows])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite training loss at epoch {epoch}, "
                    f"batch {start // config.batch_size}"
                )
            for name, g in grads.items():
                params[name] -= config.learning_rate * g
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))
        logger.debug("epoch %d loss %.6f", epoch, history[-1])
    return CnnModel(config=config, params=params, loss_history=history)


def cnn_forward(model: CnnModel, tensor: np.ndarray):
    """Prediction for one (side, side) pixel tensor."""
    t = np.asarray(tensor, dtype=np.float64)
    side = model.config.input_side
    if t.shape != (side, side):
        raise ValueError(f"expected shape ({side}, {side}), got {t.shape}")
    scores = model.predict_proba(t[None, :, :])[0]
    return prediction_from_scores(scores, model.classes)
