"""Evaluation: macro-F1 over streamed predictions plus gate and prototype
diagnostics.

Conventions, fixed across the package:

* predictions are argmax beliefs with ties resolved to the lowest class
  index;
* per-class F1 uses the 0/0 := 0 convention;
* macro-F1 averages only over classes that actually occur in the
  ground-truth labels (a class the stream never visits cannot contribute,
  a class visited but never predicted contributes 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import DimensionError, ValidationError
from .geometry import normalize


def _as_labels(x, name: str, num_classes: int) -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-d array")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValidationError(f"{name} must be integer class indices")
    if np.any(arr < 0) or np.any(arr >= num_classes):
        raise ValidationError(f"{name} contains indices outside 0..{num_classes - 1}")
    return arr.astype(np.int64)


def confusion_matrix(predictions, labels, num_classes: int) -> np.ndarray:
    """K x K counts, rows = true class, columns = predicted class."""
    preds = _as_labels(predictions, "predictions", num_classes)
    truth = _as_labels(labels, "labels", num_classes)
    if preds.size != truth.size:
        raise DimensionError(
            f"length mismatch: {preds.size} predictions vs {truth.size} labels"
        )
    conf = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(conf, (truth, preds), 1)
    return conf


def per_class_f1(confusion: np.ndarray) -> np.ndarray:
    """Per-class F1 from a confusion matrix, 0/0 := 0 throughout."""
    conf = np.asarray(confusion, dtype=np.float64)
    tp = np.diag(conf)
    predicted = conf.sum(axis=0)
    actual = conf.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / predicted, 0.0)
        recall = np.where(actual > 0, tp / actual, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    return f1


def macro_f1(predictions, labels, num_classes: int) -> float:
    """Macro-F1 averaged over the classes present in ``labels``."""
    conf = confusion_matrix(predictions, labels, num_classes)
    f1 = per_class_f1(conf)
    present = conf.sum(axis=1) > 0
    return float(f1[present].mean())


def accuracy(predictions, labels, num_classes: int) -> float:
    preds = _as_labels(predictions, "predictions", num_classes)
    truth = _as_labels(labels, "labels", num_classes)
    if preds.size != truth.size:
        raise DimensionError(
            f"length mismatch: {preds.size} predictions vs {truth.size} labels"
        )
    return float(np.mean(preds == truth))


@dataclass(frozen=True)
class EvalReport:
    """One stream, one method: scores plus adapter diagnostics.

    Score fields are None when the stream carries no labels. The lambda
    split fields are None when the stream has no boundaries (or no
    within-segment steps), and for methods that have no gate.
    """

    method: str
    n_steps: int
    num_classes: int
    macro_f1: float | None
    accuracy: float | None
    per_class_f1: list[float] | None
    confusion: list[list[int]] | None
    annihilation_count: int
    mean_lambda: float | None
    lambda_within_segments: float | None
    lambda_at_boundaries: float | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "n_steps": self.n_steps,
            "num_classes": self.num_classes,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "per_class_f1": self.per_class_f1,
            "confusion": self.confusion,
            "annihilation_count": self.annihilation_count,
            "mean_lambda": self.mean_lambda,
            "lambda_within_segments": self.lambda_within_segments,
            "lambda_at_boundaries": self.lambda_at_boundaries,
        }


def gate_split(lambdas, labels) -> tuple[float | None, float | None]:
    """Mean gate value within segments vs at boundaries, from raw values.

    Uses steps t >= 1 (the first step has no previous label). Returns
    ``(lambda_within, lambda_boundary)``; a side with no steps is None,
    e.g. a constant-label stream has no boundaries.
    """
    lam = np.asarray(lambdas, dtype=np.float64)
    truth = np.asarray(labels)
    if lam.size != truth.size:
        raise DimensionError(
            f"length mismatch: {lam.size} gate values vs {truth.size} labels"
        )
    if lam.size < 2:
        return None, None
    changed = truth[1:] != truth[:-1]
    tail = lam[1:]
    within = tail[~changed]
    boundary = tail[changed]
    return (
        float(within.mean()) if within.size else None,
        float(boundary.mean()) if boundary.size else None,
    )


def gate_diagnostics(
    traces: Sequence, labels
) -> tuple[float | None, float | None]:
    """:func:`gate_split` over the ``surprise`` field of step traces."""
    return gate_split([tr.surprise for tr in traces], labels)


@dataclass(frozen=True)
class AlignmentReport:
    """First-vs-last segment prototype alignment per class.

    ``per_class[k]`` holds the mean cosine between the class prototype and
    the normalized true centroid over the first and over the last segment
    of that class; classes with fewer than two segments are listed in
    ``skipped`` with a reason.
    """

    per_class: dict[int, dict[str, float]]
    skipped: dict[int, str]


def prototype_alignment(
    prototype_snapshots: np.ndarray, labels, class_means: np.ndarray
) -> AlignmentReport:
    """Did prototypes end up closer to the true centroids than they began?

    Args:
        prototype_snapshots: (T, K, d) bank contents after each step.
        labels: (T,) true class per step.
        class_means: (K, d) true data centroids.

    Alignment of class k at step t is the cosine between snapshot row k
    and the normalized centroid k; segment occurrences are contiguous
    label runs, and the report compares the first run's mean against the
    last run's mean for every class with at least two runs.
    """
    snaps = np.asarray(prototype_snapshots, dtype=np.float64)
    truth = np.asarray(labels)
    if snaps.ndim != 3:
        raise DimensionError(f"snapshots must be (T, K, d), got {snaps.shape}")
    t_total, k, d = snaps.shape
    if truth.shape != (t_total,):
        raise DimensionError(
            f"labels shape {truth.shape} does not match {t_total} snapshots"
        )
    means = np.asarray(class_means, dtype=np.float64)
    if means.shape != (k, d):
        raise DimensionError(f"class_means must be ({k}, {d}), got {means.shape}")
    targets = np.stack([normalize(m) for m in means])

    runs: dict[int, list[tuple[int, int]]] = {}
    start = 0
    for t in range(1, t_total + 1):
        if t == t_total or truth[t] != truth[start]:
            runs.setdefault(int(truth[start]), []).append((start, t))
            start = t

    per_class: dict[int, dict[str, float]] = {}
    skipped: dict[int, str] = {}
    for cls in range(k):
        occurrences = runs.get(cls, [])
        if len(occurrences) < 2:
            skipped[cls] = f"{len(occurrences)} segment(s), need >= 2"
            continue
        spans = []
        for lo, hi in (occurrences[0], occurrences[-1]):
            cos = snaps[lo:hi, cls, :] @ targets[cls]
            spans.append(float(cos.mean()))
        per_class[cls] = {
            "first": spans[0],
            "last": spans[1],
            "n_segments": float(len(occurrences)),
        }
    return AlignmentReport(per_class=per_class, skipped=skipped)
