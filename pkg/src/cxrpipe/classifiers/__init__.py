"""From-scratch classifiers with a uniform probability-output contract.

Every model exposes predict_proba(batch) -> (n, n_classes) rows that are
non-negative and sum to 1, and predict(single input) -> Prediction. Ties
in the winning class break toward the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import ClassLabel


@dataclass(frozen=True)
class Prediction:
    label: ClassLabel
    scores: np.ndarray


def prediction_from_scores(scores: np.ndarray, classes: np.ndarray) -> Prediction:
    """Wrap a per-class probability row; argmax picks the first maximum."""
    scores = np.asarray(scores, dtype=np.float64)
    winner = int(classes[int(np.argmax(scores))])
    return Prediction(label=ClassLabel(winner), scores=scores)


def softmax(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax."""
    shifted = values - np.max(values, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


from .svm import KernelSpec, SvmModel, train_svm, predict_svm  # noqa: E402
from .forest import ForestModel, ForestParams, train_forest, predict_forest  # noqa: E402
from .cnn import CnnModel, CnnConfig, cnn_train, cnn_forward  # noqa: E402
from .store import save_model, load_model  # noqa: E402

__all__ = [
    "Prediction",
    "prediction_from_scores",
    "softmax",
    "SvmModel",
    "train_svm",
    "predict_svm",
    "ForestModel",
    "ForestParams",
    "train_forest",
    "predict_forest",
    "KernelSpec",
    "CnnModel",
    "CnnConfig",
    "cnn_train",
    "cnn_forward",
    "save_model",
    "load_model",
]
