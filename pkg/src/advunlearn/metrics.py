"""Confusion matrices, unweighted average recall and the one-tailed z-test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class EmptyEvaluationError(ValueError):
    pass


def chance_level(class_count: int) -> float:
    return 1.0 / class_count


def confusion_matrix(y_true, y_pred, class_count: int) -> np.ndarray:
    """Rows are true classes, columns predicted classes."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("truth and prediction lengths differ")
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def per_class_recall(confusion) -> np.ndarray:
    """Recall per class; NaN for classes with no true samples."""
    cm = np.asarray(confusion)
    rows = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(rows > 0, np.diag(cm) / rows, np.nan)


def uar(confusion) -> float:
    rec = per_class_recall(confusion)
    if np.all(np.isnan(rec)):
        raise EmptyEvaluationError("confusion matrix has no populated rows")
    return float(np.nanmean(rec))


@dataclass
class EvalReport:
    uar: float
    confusion: np.ndarray
    per_class_recall: np.ndarray
    split_name: str
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "split": self.split_name,
            "uar": self.uar,
            "n_samples": self.n_samples,
            "per_class_recall": [None if math.isnan(r) else float(r) for r in self.per_class_recall],
            "confusion": self.confusion.tolist(),
        }


def evaluate(model, ds, split_name: str = "") -> EvalReport:
    if len(ds) == 0:
        raise EmptyEvaluationError(f"cannot evaluate on empty split {split_name!r}")
    cm = confusion_matrix(ds.y, model.predict(ds.X), ds.class_count)
    return EvalReport(uar(cm), cm, per_class_recall(cm), split_name, len(ds))


class ZTest(NamedTuple):
    z: float
    p_value: float
    degenerate: bool = False


def one_tailed_z_test(uar_a: float, uar_b: float, n_a: int, n_b: int) -> ZTest:
    """Pooled two-proportion z-test of ``a > b``; returns P(Z >= z).

    Each UAR is treated as a success rate over its sample count. On
    unbalanced data this is an approximation, since UAR is not a raw
    proportion there.
    """
    if n_a < 1 or n_b < 1:
        raise ValueError("sample counts must be positive")
    if not (0 <= uar_a <= 1 and 0 <= uar_b <= 1):
        raise ValueError("UAR values must lie in [0, 1]")
    pooled = (uar_a * n_a + uar_b * n_b) / (n_a + n_b)
    var = pooled * (1 - pooled) * (1 / n_a + 1 / n_b)
    if var <= 0:
        return ZTest(0.0, 0.5, True)
    z = (uar_a - uar_b) / math.sqrt(var)
    return ZTest(z, 0.5 * math.erfc(z / math.sqrt(2)))
