"""Evaluation: confusion matrices, accuracy, per-class P/R/F1, macro-F1,
and pseudo-label (labeling) accuracy against withheld gold labels.

Zero-division convention: precision or recall with an empty denominator
is 0 and the affected class is flagged in the report. A class absent
from both gold and predictions contributes F1 = 0 to the macro mean
(also flagged). Macro-F1 is the default aggregate given class-imbalanced
corpora; micro-F1 is exposed alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import DataError

# rows = gold, columns = predicted
ConfusionMatrix = np.ndarray


def confusion(
    gold: Sequence[int], predicted: Sequence[int], num_classes: int
) -> ConfusionMatrix:
    if len(gold) != len(predicted):
        raise DataError(
            f"gold has {len(gold)} labels but predictions have {len(predicted)}"
        )
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    for g, p in zip(gold, predicted):
        if not (0 <= g < num_classes and 0 <= p < num_classes):
            raise DataError(f"label pair ({g},{p}) out of range for C={num_classes}")
        cm[g, p] += 1
    return cm


def accuracy(cm: ConfusionMatrix) -> float:
    total = int(cm.sum())
    if total == 0:
        return 0.0
    return float(np.trace(cm)) / total


@dataclass(frozen=True)
class ClassScores:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_f1: float
    micro_f1: float
    per_class: tuple[ClassScores, ...]
    n_evaluated: int
    flags: tuple[str, ...] = ()
    labeling_accuracy: float | None = None

    def to_dict(self) -> dict:
        out = {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "per_class": [
                {
                    "name": c.name,
                    "precision": c.precision,
                    "recall": c.recall,
                    "f1": c.f1,
                    "support": c.support,
                }
                for c in self.per_class
            ],
            "n": self.n_evaluated,
            "flags": list(self.flags),
        }
        if self.labeling_accuracy is not None:
            out["labeling_accuracy"] = self.labeling_accuracy
        return out


def per_class_scores(
    cm: ConfusionMatrix, class_names: Sequence[str]
) -> tuple[list[ClassScores], list[str]]:
    scores = []
    flags = []
    for c, name in enumerate(class_names):
        tp = int(cm[c, c])
        gold_total = int(cm[c, :].sum())
        pred_total = int(cm[:, c].sum())
        if pred_total == 0:
            precision = 0.0
            flags.append(f"class {name!r}: precision 0/0 treated as 0")
        else:
            precision = tp / pred_total
        if gold_total == 0:
            recall = 0.0
            flags.append(f"class {name!r}: recall 0/0 treated as 0")
        else:
            recall = tp / gold_total
        if precision + recall == 0.0:
            f1 = 0.0
            if gold_total == 0 and pred_total == 0:
                flags.append(f"class {name!r}: absent from gold and predictions, F1 counted as 0")
        else:
            f1 = 2.0 * precision * recall / (precision + recall)
        scores.append(
            ClassScores(name=name, precision=precision, recall=recall, f1=f1, support=gold_total)
        )
    return scores, flags


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1, every class counted."""
    names = [str(c) for c in range(cm.shape[0])]
    scores, _ = per_class_scores(cm, names)
    return sum(s.f1 for s in scores) / len(scores)


def micro_f1(cm: ConfusionMatrix) -> float:
    """Micro-averaged F1; equals accuracy for single-label classification."""
    return accuracy(cm)


def report_from_confusion(
    cm: ConfusionMatrix,
    class_names: Sequence[str],
    labeling_accuracy: float | None = None,
) -> MetricsReport:
    scores, flags = per_class_scores(cm, class_names)
    return MetricsReport(
        accuracy=accuracy(cm),
        macro_f1=sum(s.f1 for s in scores) / len(scores),
        micro_f1=micro_f1(cm),
        per_class=tuple(scores),
        n_evaluated=int(cm.sum()),
        flags=tuple(flags),
        labeling_accuracy=labeling_accuracy,
    )


def labeling_accuracy(
    pairs: Iterable[tuple[str, int]], shadow_gold: Mapping[str, int]
) -> float:
    """Fraction of (instance_id, pseudo_label) pairs matching withheld gold."""
    total = 0
    correct = 0
    for instance_id, label in pairs:
        if instance_id not in shadow_gold:
            raise DataError(f"no withheld gold label for instance {instance_id!r}")
        total += 1
        if shadow_gold[instance_id] == label:
            correct += 1
    if total == 0:
        raise DataError("labeling_accuracy needs at least one pair")
    return correct / total


@dataclass(frozen=True)
class Aggregate:
    mean: float
    ci95: float | None  # half-width; None when fewer than 2 values
    values: tuple[float, ...] = field(default=())

    def to_dict(self) -> dict:
        return {"mean": self.mean, "ci95": self.ci95, "values": list(self.values)}


def aggregate(values: Sequence[float], confidence: float = 0.95) -> Aggregate:
    """Mean with a t-distribution confidence-interval half-width over seeds."""
    if not values:
        raise DataError("cannot aggregate an empty value list")
    vals = [float(v) for v in values]
    mean = sum(vals) / len(vals)
    if len(vals) < 2:
        return Aggregate(mean=mean, ci95=None, values=tuple(vals))
    sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
    t_crit = float(stats.t.ppf(0.5 + confidence / 2.0, df=len(vals) - 1))
    return Aggregate(
        mean=mean, ci95=t_crit * sd / math.sqrt(len(vals)), values=tuple(vals)
    )
