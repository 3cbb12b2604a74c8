"""Confusion matrices over a train/test split and the four standard metrics."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass
class PerformanceReport:
    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    undefined: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "undefined": list(self.undefined)}


def confusion_for_child(recs, plays, universe) -> ConfusionMatrix:
    """Train-period recommendations against test-period plays within ``universe``."""
    recs, plays, universe = set(recs), set(plays), set(universe)
    if not recs <= universe or not plays <= universe:
        raise ValueError("recommended and played apps must lie inside the universe")
    return ConfusionMatrix(
        tp=len(recs & plays),
        fp=len(recs - plays),
        fn=len(plays - recs),
        tn=len(universe - (recs | plays)),
    )


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def performance_metrics(m: ConfusionMatrix) -> PerformanceReport:
    """Accuracy, precision, recall, F1. Undefined ratios are ``None`` and listed."""
    undefined = []
    accuracy = (m.tp + m.tn) / m.total if m.total else None
    precision = m.tp / (m.tp + m.fp) if m.tp + m.fp else None
    recall = m.tp / (m.tp + m.fn) if m.tp + m.fn else None
    f1 = f1_score(precision, recall) if precision is not None and recall is not None else None
    for name, v in (("accuracy", accuracy), ("precision", precision), ("recall", recall), ("f1", f1)):
        if v is None:
            undefined.append(name)
    return PerformanceReport(accuracy, precision, recall, f1, undefined)
