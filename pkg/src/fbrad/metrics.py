"""F1, ROC-AUC and macro-averaging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def from_predictions(cls, predicted, labels) -> ConfusionCounts:
        p = np.asarray(predicted).astype(bool)
        y = np.asarray(labels).astype(bool)
        if p.shape != y.shape:
            raise ValidationError("predictions and labels differ in shape")
        return cls(int(np.sum(p & y)), int(np.sum(p & ~y)),
                   int(np.sum(~p & y)), int(np.sum(~p & ~y)))


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1_score(c: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall; 0/0 anywhere counts as 0."""
    p, r = precision(c), recall(c)
    return _ratio(2 * p * r, p + r)


def roc_auc(scores, labels) -> float:
    """Area under the ROC staircase swept over every distinct score.

    Tied scores form one diagonal step, so the result equals the
    Mann-Whitney statistic with ties counted half. The area is accumulated
    in integer units and divided once at the end.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise ValidationError("scores and labels must be equal-length vectors")
    pos = int(y.sum())
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise ValidationError("roc_auc needs both classes")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    tp = np.cumsum(y)[ends].astype(np.int64)
    fp = (ends + 1) - tp
    tp = np.concatenate([[0], tp])
    fp = np.concatenate([[0], fp])
    twice_area = int(np.sum((fp[1:] - fp[:-1]) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * pos * neg)


def macro_average(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValidationError("macro_average of no series")
    return float(v.mean())
