"""Evaluation metrics: accuracy, per-class F1, per-class summaries across
surgeries, and ROC/AUC.

Conventions (the source tables do not pin them down, so they are fixed here):
per-class "accuracy" is one-vs-rest binary accuracy; F1 with an empty
numerator or denominator is 0; macro F1 averages over classes present in the
targets; summary deviation is the population standard deviation; multiclass
ROC is one-vs-rest per class.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .errors import DegenerateClassesError, EmptyInputError, LengthMismatchError

Label = Hashable


def _check_lengths(preds: Sequence, targets: Sequence) -> None:
    if len(preds) != len(targets):
        raise LengthMismatchError(f"{len(preds)} predictions vs {len(targets)} targets")


def accuracy(preds: Sequence[Label], targets: Sequence[Label]) -> float:
    """Fraction of exact matches."""
    _check_lengths(preds, targets)
    if not targets:
        raise EmptyInputError("no samples")
    return sum(p == t for p, t in zip(preds, targets)) / len(targets)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def binary_accuracy(self) -> float:
        """One-vs-rest accuracy for this class."""
        return (self.tp + self.tn) / self.total if self.total else 0.0


def confusion_counts(preds: Sequence[Label], targets: Sequence[Label],
                     classes: Sequence[Label]) -> dict[Label, ConfusionCounts]:
    _check_lengths(preds, targets)
    out = {}
    for cls in classes:
        tp = sum(p == cls and t == cls for p, t in zip(preds, targets))
        fp = sum(p == cls and t != cls for p, t in zip(preds, targets))
        fn = sum(p != cls and t == cls for p, t in zip(preds, targets))
        out[cls] = ConfusionCounts(tp, fp, fn, len(targets) - tp - fp - fn)
    return out


@dataclass(frozen=True)
class F1Result:
    per_class: dict[Label, float]
    macro: float
    counts: dict[Label, ConfusionCounts]


def f1_scores(preds: Sequence[Label], targets: Sequence[Label],
              classes: Sequence[Label] | None = None) -> F1Result:
    """Per-class F1 plus macro F1 over classes present in the targets."""
    _check_lengths(preds, targets)
    if classes is None:
        classes = sorted(set(targets) | set(preds))  # labels must be orderable
    counts = confusion_counts(preds, targets, classes)
    per_class = {cls: c.f1 for cls, c in counts.items()}
    present = [cls for cls in classes if counts[cls].tp + counts[cls].fn > 0]
    macro = sum(per_class[cls] for cls in present) / len(present) if present else 0.0
    return F1Result(per_class=per_class, macro=macro, counts=counts)


@dataclass(frozen=True)
class RocSeries:
    """Staircase with one point per distinct score plus the (0, 0) origin."""
    points: tuple[tuple[float, float], ...]  # (fpr, tpr), non-decreasing
    auc: float


def roc_auc(scores: Sequence[float], positives: Sequence[bool]) -> RocSeries:
    """Threshold sweep over distinct scores; AUC by the trapezoidal rule.

    Tied scores move between point groups together, which makes the trapezoid
    area equal the Mann-Whitney statistic with ties counted one half.
    """
    _check_lengths(scores, positives)
    n_pos = sum(bool(p) for p in positives)
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassesError(
            f"need at least one positive and one negative, got {n_pos}/{n_neg}"
        )
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    pos = np.asarray(positives, dtype=bool)[order]
    sorted_scores = np.asarray(scores, dtype=float)[order]

    points = [(0.0, 0.0)]
    tp = fp = 0
    for i in range(len(order)):
        tp += bool(pos[i])
        fp += not pos[i]
        last_of_group = i + 1 == len(order) or sorted_scores[i + 1] != sorted_scores[i]
        if last_of_group:
            points.append((fp / n_neg, tp / n_pos))

    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    auc = float(np.trapezoid(tpr, fpr))
    return RocSeries(points=tuple(points), auc=auc)


def per_class_summary(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation across surgeries."""
    if not values:
        raise EmptyInputError("no per-surgery values")
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())
