"""Classification and detection metric mathematics.

Pure functions end to end: confusion matrices, one-vs-rest
precision/recall/F1 with macro averages, ranked precision-recall
curves, and COCO-style average precision (101-point interpolation,
IoU sweep 0.50:0.05:0.95 for the mAP@50-95 form).

Conventions, fixed and documented rather than configurable:
  - confusion matrix rows are the true class, columns the predicted
    class, both in (Invalid, Negative, Positive) order;
  - 0/0 ratios (a class never predicted and never present) score 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .labels import ClassLabel

MATRIX_ORDER = (ClassLabel.INVALID, ClassLabel.NEGATIVE, ClassLabel.POSITIVE)
_MATRIX_INDEX = {label: i for i, label in enumerate(MATRIX_ORDER)}

RECALL_GRID = np.linspace(0.0, 1.0, 101)
IOU_SWEEP = tuple(np.arange(0.50, 0.96, 0.05).round(2))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (3, 3) int64, rows=true, cols=predicted

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (3, 3):
            raise ValueError(f"confusion matrix must be 3x3, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_text(self) -> str:
        names = [l.display for l in MATRIX_ORDER]
        width = max(9, *(len(n) for n in names)) + 2
        lines = [" " * width + "".join(f"{n:>{width}}" for n in names)]
        for name, row in zip(names, self.counts):
            lines.append(f"{name:>{width}}" + "".join(f"{v:>{width}d}" for v in row))
        return "\n".join(lines)

    def to_record(self) -> dict:
        return {"order": [l.display for l in MATRIX_ORDER],
                "counts": self.counts.tolist()}


@dataclass
class ClassMetrics:
    per_class: dict  # display name -> {"precision": p, "recall": r, "f1": f}
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float

    def to_record(self) -> dict:
        flat = {"accuracy": self.accuracy,
                "macro_precision": self.macro_precision,
                "macro_recall": self.macro_recall,
                "macro_f1": self.macro_f1}
        for name, vals in self.per_class.items():
            for metric, value in vals.items():
                flat[f"{name.lower()}_{metric}"] = value
        return flat


def confusion_matrix(true_labels, predicted_labels) -> ConfusionMatrix:
    true_labels = list(true_labels)
    predicted_labels = list(predicted_labels)
    if len(true_labels) != len(predicted_labels):
        raise ValueError(
            f"label list lengths differ: {len(true_labels)} vs {len(predicted_labels)}")
    counts = np.zeros((3, 3), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        counts[_MATRIX_INDEX[ClassLabel(t)], _MATRIX_INDEX[ClassLabel(p)]] += 1
    return ConfusionMatrix(counts)


def _safe_div(num, den):
    return num / den if den > 0 else 0.0


def prf_scores(cm: ConfusionMatrix) -> ClassMetrics:
    """One-vs-rest precision/recall/F1 per class plus unweighted macros."""
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    per_class = {}
    ps, rs, fs = [], [], []
    for i, label in enumerate(MATRIX_ORDER):
        tp = float(cm.counts[i, i])
        fp = float(cm.counts[:, i].sum() - cm.counts[i, i])
        fn = float(cm.counts[i, :].sum() - cm.counts[i, i])
        p = _safe_div(tp, tp + fp)
        r = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * p * r, p + r)
        per_class[label.display] = {"precision": p, "recall": r, "f1": f1}
        ps.append(p)
        rs.append(r)
        fs.append(f1)
    return ClassMetrics(
        per_class=per_class,
        macro_precision=float(np.mean(ps)),
        macro_recall=float(np.mean(rs)),
        macro_f1=float(np.mean(fs)),
        accuracy=float(np.trace(cm.counts)) / cm.total,
    )


@dataclass
class PRCurve:
    """Detections ranked by confidence against a fixed ground-truth count."""
    scores: np.ndarray
    is_tp: np.ndarray
    n_groundtruth: int
    precision: np.ndarray = field(init=False)
    recall: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_groundtruth < 1:
            raise ValueError("need at least one ground-truth object")
        scores = np.asarray(self.scores, dtype=np.float64)
        is_tp = np.asarray(self.is_tp, dtype=bool)
        if scores.shape != is_tp.shape or scores.ndim != 1:
            raise ValueError("scores and is_tp must be matching 1-D arrays")
        order = np.argsort(-scores, kind="stable")
        self.scores = scores[order]
        self.is_tp = is_tp[order]
        cum_tp = np.cumsum(self.is_tp)
        ranks = np.arange(1, len(self.scores) + 1)
        self.precision = cum_tp / ranks if len(ranks) else np.zeros(0)
        self.recall = cum_tp / self.n_groundtruth if len(ranks) else np.zeros(0)


def average_precision(prc: PRCurve) -> float:
    """101-point interpolated AP: mean over the recall grid of the best
    precision achieved at or beyond each recall level."""
    if len(prc.scores) == 0:
        return 0.0
    # running max of precision from the right
    best = np.maximum.accumulate(prc.precision[::-1])[::-1]
    idx = np.searchsorted(prc.recall, RECALL_GRID, side="left")
    interp = np.where(idx < len(best), best[np.minimum(idx, len(best) - 1)], 0.0)
    return float(interp.mean())


def mean_average_precision(aps) -> float:
    aps = list(aps)
    if not aps:
        raise ValueError("no average-precision values to average")
    return float(np.mean(aps))
