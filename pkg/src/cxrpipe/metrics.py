"""Confusion-matrix evaluation: accuracy, per-class P/R/F1, macro averages.

Macro values are unweighted means over classes. A class with a zero
denominator (never predicted for precision, never true for recall) scores
0 by convention and is listed in zero_division_classes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import ClassLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    support: np.ndarray
    zero_division_classes: tuple[int, ...]


def confusion(
    y_true: np.ndarray, y_pred: np.ndarray, n_classes: int = len(ClassLabel)
) -> np.ndarray:
    """Counts matrix, rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(
            f"label vectors must be 1-D and equal length, got "
            f"{y_true.shape} and {y_pred.shape}"
        )
    if y_true.size == 0:
        raise ValueError("cannot build a confusion matrix from empty inputs")
    if y_true.min() < 0 or y_true.max() >= n_classes:
        raise ValueError(f"true labels out of range [0, {n_classes})")
    if y_pred.min() < 0 or y_pred.max() >= n_classes:
        raise ValueError(f"predicted labels out of range [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def report(cm: np.ndarray) -> MetricsReport:
    """Metrics from a confusion matrix: accuracy = trace/total,
    precision_c = TP/(TP+FP), recall_c = TP/(TP+FN), f1 = harmonic mean.
    """
    cm = np.asarray(cm, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise ValueError(f"confusion matrix must be square, got shape {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix entries must be non-negative")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty (total count 0)")

    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    actual = cm.sum(axis=1).astype(np.float64)

    zero_div: list[int] = []
    precision = np.zeros(cm.shape[0])
    recall = np.zeros(cm.shape[0])
    f1 = np.zeros(cm.shape[0])
    for c in range(cm.shape[0]):
        flagged = False
        if predicted[c] > 0:
            precision[c] = tp[c] / predicted[c]
        else:
            flagged = True
        if actual[c] > 0:
            recall[c] = tp[c] / actual[c]
        else:
            flagged = True
        if precision[c] + recall[c] > 0:
            f1[c] = 2 * precision[c] * recall[c] / (precision[c] + recall[c])
        if flagged:
            zero_div.append(c)
    if zero_div:
        logger.warning(
            "classes %s scored 0 on a zero-denominator metric", zero_div
        )

    return MetricsReport(
        accuracy=float(np.trace(cm) / total),
        precision=precision,
        recall=recall,
        f1=f1,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        support=actual.astype(np.int64),
        zero_division_classes=tuple(zero_div),
    )


def report_to_dict(rep: MetricsReport) -> dict:
    """Full-precision JSON-ready form, keyed by class name."""
    per_class = {}
    for c in range(len(rep.precision)):
        name = ClassLabel(c).name if c < len(ClassLabel) else str(c)
        per_class[name] = {
            "precision": rep.precision[c],
            "recall": rep.recall[c],
            "f1": rep.f1[c],
            "support": int(rep.support[c]),
        }
    return {
        "accuracy": rep.accuracy,
        "macro_precision": rep.macro_precision,
        "macro_recall": rep.macro_recall,
        "macro_f1": rep.macro_f1,
        "per_class": per_class,
        "zero_division_classes": [
            ClassLabel(c).name for c in rep.zero_division_classes
        ],
    }


def format_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Fixed-width table, two-decimal rounding, one row per model."""
    header = f"{'Model':<24} {'Accuracy':>9} {'Precision':>10} {'Recall':>7} {'F1 Score':>9}"
    lines = [header, "-" * len(header)]
    for name, rep in rows:
        lines.append(
            f"{name:<24} {rep.accuracy:>9.2f} {rep.macro_precision:>10.2f} "
            f"{rep.macro_recall:>7.2f} {rep.macro_f1:>9.2f}"
        )
    return "\n".join(lines) + "\n"
