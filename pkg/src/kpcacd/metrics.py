"""Accuracy assessment against reference maps with undefined pixels.

Reference label -1 marks pixels excluded from every count. Confusion rows
index the reference class, columns the predicted class, so row sums equal
the reference class histogram over defined pixels.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .segment import ChangeMap


@dataclass(frozen=True)
class ReferenceMap:
    """Reference labels: -1 undefined, 0 non-change, 1..K change classes."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 2:
            raise DataError(f"reference map must be 2-D, got shape {labels.shape}")
        if labels.min(initial=0) < -1:
            raise DataError("reference labels below -1")
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self):
        return int(max(self.labels.max(initial=0), 0))

    def binarized(self):
        """Collapse change classes to a single class 1, keeping -1 pixels."""
        labels = self.labels.copy()
        labels[labels > 0] = 1
        return ReferenceMap(labels)


@dataclass(frozen=True)
class MetricsReport:
    """Counts and agreement statistics over the defined pixels.

    tp/fp/tn/fn binarize the maps (any change class counts as change);
    oe is the total number of misclassified pixels, so for binary maps
    oe = fp + fn. per_class_accuracy[k] is the recall of class k (NaN for
    classes absent from the reference). degenerate flags the PE = 1 case
    where kappa is reported as 0 by convention.
    """

    tp: int
    fp: int
    tn: int
    fn: int
    oe: int
    oa: float
    kappa: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    degenerate: bool = field(default=False)

    def to_dict(self):
        acc = [None if np.isnan(a) else float(a) for a in self.per_class_accuracy]
        return {
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "oe": self.oe,
            "oa": self.oa,
            "kappa": self.kappa,
            "per_class_accuracy": acc,
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "degenerate": self.degenerate,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self):
        lines = ["field,value"]
        doc = self.to_dict()
        for key in ("tp", "fp", "tn", "fn", "oe", "oa", "kappa", "degenerate"):
            lines.append(f"{key},{doc[key]}")
        for k, acc in enumerate(doc["per_class_accuracy"]):
            lines.append(f"per_class_accuracy_{k},{'' if acc is None else acc}")
        for i, row in enumerate(doc["confusion"]):
            for j, v in enumerate(row):
                lines.append(f"confusion_{i}_{j},{v}")
        return "\n".join(lines) + "\n"


def _defined_pair(pred, ref):
    if pred.labels.shape != ref.labels.shape:
        raise DataError(
            f"prediction shape {pred.labels.shape} does not match "
            f"reference shape {ref.labels.shape}"
        )
    mask = ref.labels >= 0
    n = int(mask.sum())
    if n == 0:
        raise DataError("reference map has no defined pixels")
    return pred.labels[mask], ref.labels[mask], n


def _confusion(p, r, k):
    return np.bincount(r * (k + 1) + p, minlength=(k + 1) ** 2).reshape(k + 1, k + 1)


def _binary_counts(p, r):
    tp = int(np.sum((p > 0) & (r > 0)))
    fp = int(np.sum((p > 0) & (r == 0)))
    tn = int(np.sum((p == 0) & (r == 0)))
    fn = int(np.sum((p == 0) & (r > 0)))
    return tp, fp, tn, fn


def binary_metrics(pred, ref):
    """Binary accuracy assessment: FP/FN/OE/OA and the kappa coefficient.

    OE = FP + FN, OA = 1 - OE/N, and kappa = (OA - PE) / (1 - PE) with
    PE = ((TP+FP)(TP+FN) + (TN+FN)(FP+TN)) / N^2.
    """
    if ref.n_classes > 1:
        raise DataError(f"binary metrics need a binary reference, got {ref.n_classes} classes")
    p, r, n = _defined_pair(pred, ref)
    p = (p > 0).astype(np.int64)
    tp, fp, tn, fn = _binary_counts(p, r)
    oe = fp + fn
    oa = 1.0 - oe / n
    pe = ((tp + fp) * (tp + fn) + (tn + fn) * (fp + tn)) / n**2
    degenerate = pe == 1.0
    kappa = 0.0 if degenerate else (oa - pe) / (1.0 - pe)
    confusion = _confusion(p, r, 1)
    with np.errstate(invalid="ignore"):
        per_class = np.diag(confusion) / confusion.sum(axis=1)
    return MetricsReport(tp, fp, tn, fn, oe, oa, kappa, per_class, confusion, degenerate)


def multiclass_metrics(pred, ref):
    """Per-class accuracy, OA, and multi-class kappa over defined pixels."""
    k = ref.n_classes
    if pred.n_classes != k:
        raise DataError(
            f"prediction has {pred.n_classes} change classes, reference has {k}"
        )
    p, r, n = _defined_pair(pred, ref)
    confusion = _confusion(p, r, k)
    trace = int(np.trace(confusion))
    oa = trace / n
    pe = float(confusion.sum(axis=1) @ confusion.sum(axis=0)) / n**2
    degenerate = pe == 1.0
    kappa = 0.0 if degenerate else (oa - pe) / (1.0 - pe)
    with np.errstate(invalid="ignore"):
        per_class = np.diag(confusion) / confusion.sum(axis=1)
    tp, fp, tn, fn = _binary_counts(p, r)
    return MetricsReport(tp, fp, tn, fn, n - trace, oa, kappa, per_class, confusion, degenerate)


def class_alignment(pred, ref):
    """Relabel prediction classes to best match the reference classes.

    Unsupervised cluster ids are arbitrary; this searches all permutations of
    the change-class ids (label 0 stays fixed) for the one maximizing the
    confusion-matrix trace. Exhaustive, so limited to K <= 8.
    """
    k = ref.n_classes
    if pred.n_classes != k:
        raise DataError(
            f"prediction has {pred.n_classes} change classes, reference has {k}"
        )
    if k > 8:
        raise DataError(f"alignment searches K! permutations; K={k} exceeds 8")
    if k <= 1:
        return pred
    p, r, _ = _defined_pair(pred, ref)
    confusion = _confusion(p, r, k)
    best_perm, best_trace = None, -1
    for perm in itertools.permutations(range(1, k + 1)):
        trace = sum(confusion[perm[c - 1], c] for c in range(1, k + 1))
        if trace > best_trace:
            best_perm, best_trace = perm, trace
    mapping = np.arange(k + 1, dtype=np.int64)
    for c in range(1, k + 1):
        mapping[c] = best_perm[c - 1]
    return ChangeMap(mapping[pred.labels], k)
