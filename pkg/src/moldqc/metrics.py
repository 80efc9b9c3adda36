"""Confusion counts, accuracy/specificity/sensitivity and evaluation reports.

The positive class is a rejected part (label 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from decimal import Decimal, ROUND_HALF_UP
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {k: int(v) for k, v in asdict(self).items()}


def confusion(y_true: Sequence[int], y_pred: Sequence[int]) -> ConfusionMatrix:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape or t.ndim != 1:
        raise ValueError("y_true and y_pred must be vectors of equal length")
    if len(t) == 0:
        raise ValueError("at least one prediction is required")
    for v in (t, p):
        if not np.all((v == 0) | (v == 1)):
            raise ValueError("labels must be 0 or 1")
    t = t.astype(bool)
    p = p.astype(bool)
    return ConfusionMatrix(tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
                           fn=int(np.sum(t & ~p)), tn=int(np.sum(~t & ~p)))


def _ratio(num: int, den: int) -> float:
    return num / den if den else math.nan


def metrics(cm: ConfusionMatrix) -> tuple[float, float, float]:
    """(accuracy, specificity, sensitivity) as fractions; NaN where undefined."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return (_ratio(cm.tp + cm.tn, cm.total), _ratio(cm.tn, cm.tn + cm.fp),
            _ratio(cm.tp, cm.tp + cm.fn))


def percent(x: float) -> str:
    """Fraction as a percentage with one decimal, halves rounded away from zero."""
    if math.isnan(x):
        return "NaN"
    # round the shortest decimal form, so 0.9995 -> "100.0" rather than binary noise
    d = Decimal(repr(x)) * 100
    return str(d.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass
class EvalReport:
    approach: str
    dataset: str
    seed: int
    confusion: ConfusionMatrix

    @property
    def accuracy(self) -> float:
        return metrics(self.confusion)[0]

    @property
    def specificity(self) -> float:
        return metrics(self.confusion)[1]

    @property
    def sensitivity(self) -> float:
        return metrics(self.confusion)[2]

    def to_dict(self) -> dict:
        acc, spec, sens = metrics(self.confusion)
        # NaN is not valid JSON; undefined rates are written as null
        clean = [None if math.isnan(v) else v for v in (acc, spec, sens)]
        return {"approach": self.approach, "dataset": self.dataset, "seed": self.seed,
                "confusion": self.confusion.to_dict(),
                "accuracy": clean[0], "specificity": clean[1], "sensitivity": clean[2],
                "accuracy_pct": percent(acc), "specificity_pct": percent(spec),
                "sensitivity_pct": percent(sens)}

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(d["approach"], d["dataset"], int(d["seed"]), ConfusionMatrix(**d["confusion"]))


def format_table(reports: Sequence[EvalReport]) -> str:
    header = f"{'Approach':<20} {'Accuracy':>9} {'Specificity':>12} {'Sensitivity':>12} {'TP':>5} {'FP':>5} {'FN':>5} {'TN':>5}"
    lines = [header, "-" * len(header)]
    for r in reports:
        acc, spec, sens = metrics(r.confusion)
        c = r.confusion
        lines.append(f"{r.approach:<20} {percent(acc):>9} {percent(spec):>12} {percent(sens):>12} "
                     f"{c.tp:>5} {c.fp:>5} {c.fn:>5} {c.tn:>5}")
    return "\n".join(lines)
