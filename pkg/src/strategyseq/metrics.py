"""Per-label precision/recall/F1, macro and support-weighted averages.

Macro F1 averages over the labels present in the gold sequence only; a
label that never occurs in gold (even if predicted) does not dilute the
mean.  Weighted F1 weights each gold-present label's F1 by its support.
Both conventions are fixed here and mirrored by the report emitters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class RoleReport:
    labels: tuple
    per_label: dict
    macro_f1: float
    weighted_f1: float
    confusion: np.ndarray

    def to_dict(self):
        return {
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "per_label": {
                name: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                }
                for name, s in self.per_label.items()
            },
            "confusion": self.confusion.tolist(),
        }


@dataclass
class EvalReport:
    er: RoleReport
    ee: RoleReport
    success_accuracy: float | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"er": self.er.to_dict(), "ee": self.ee.to_dict()}
        if self.success_accuracy is not None:
            out["success_accuracy"] = self.success_accuracy
        out.update(self.extras)
        return out


def confusion_counts(gold, pred, n_labels):
    """cell (i, j) counts gold=i predicted=j; rows sum to gold supports."""
    gold = np.asarray(gold, dtype=np.intp)
    pred = np.asarray(pred, dtype=np.intp)
    if gold.shape != pred.shape:
        raise ValueError(f"gold and pred differ in length: {len(gold)} vs {len(pred)}")
    matrix = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(matrix, (gold, pred), 1)
    return matrix


def f1_report(gold, pred, vocab):
    """Score one role's predictions against gold (same-length id lists)."""
    return f1_from_confusion(confusion_counts(gold, pred, len(vocab)), vocab)


def f1_from_confusion(confusion, vocab):
    """Build a RoleReport from a (possibly pooled across folds) confusion matrix."""
    supports = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    correct = np.diag(confusion)
    per_label = {}
    macro_terms = []
    weighted_num = 0.0
    for i, name in enumerate(vocab.names):
        tp = float(correct[i])
        p = tp / predicted[i] if predicted[i] > 0 else 0.0
        r = tp / supports[i] if supports[i] > 0 else 0.0
        f1 = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
        per_label[name] = LabelScore(precision=p, recall=r, f1=f1,
                                     support=int(supports[i]))
        if supports[i] > 0:
            macro_terms.append(f1)
            weighted_num += f1 * supports[i]
    total_support = int(supports.sum())
    macro = float(np.mean(macro_terms)) if macro_terms else 0.0
    weighted = weighted_num / total_support if total_support else 0.0
    return RoleReport(
        labels=vocab.names,
        per_label=per_label,
        macro_f1=macro,
        weighted_f1=float(weighted),
        confusion=confusion,
    )
