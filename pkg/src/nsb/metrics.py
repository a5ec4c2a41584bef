"""Objective segmentation quality metrics and dataset-level evaluation.

Dice = 2TP / (2TP + FP + FN), accuracy = (TP + TN) / total, and the
boundary displacement error is the symmetrized mean nearest-neighbor
Euclidean distance between two boundary pixel sets. Confidence intervals
use the 95% normal approximation (1.96 sigma / sqrt(n), sample std with
the n-1 denominator).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


class EmptyBoundaryError(ValueError):
    """BDE is undefined when a boundary has no pixels."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def both_empty(self) -> bool:
        # degenerate dice case: neither mask has any on-pixel
        return self.tp + self.fp + self.fn == 0


def confusion_counts(pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    """Pixelwise tally of two equal-shape boolean masks."""
    if pred.shape != gt.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    pred = pred.astype(bool)
    gt = gt.astype(bool)
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    tn = pred.size - tp - fp - fn
    return ConfusionCounts(tp, fp, fn, tn)


def dice(c: ConfusionCounts) -> float:
    """2TP / (2TP + FP + FN); two empty masks score 1.0 by convention
    (check ``c.both_empty`` to tell that case apart)."""
    denom = 2 * c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return 2 * c.tp / denom


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("empty masks have no accuracy")
    return (c.tp + c.tn) / c.total


def bde(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric boundary displacement error in pixels.

    Mean over a of the distance to the nearest pixel of b, averaged with
    the reverse direction. Both boundaries are (K, 2) coordinate arrays.
    """
    return sum(bde_directed(a, b)) / 2.0


def bde_directed(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Both one-way mean nearest-neighbor distances (a->b, b->a)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptyBoundaryError("BDE is undefined for an empty boundary")
    tree_a, tree_b = cKDTree(a), cKDTree(b)
    d_ab = tree_b.query(a)[0].mean()
    d_ba = tree_a.query(b)[0].mean()
    return float(d_ab), float(d_ba)


def mean_confidence_interval(values, level_z: float = 1.96) -> tuple[float, float]:
    """(mean, half-width) of the normal-approximation confidence interval."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size < 2:
        raise ValueError(f"need at least 2 values, got {arr.size}")
    half = level_z * arr.std(ddof=1) / math.sqrt(arr.size)
    return float(arr.mean()), float(half)


# --------------------------------------------------------------- reporting


@dataclass(frozen=True)
class ImageResult:
    image_id: str
    class_true: str
    class_pred: str
    confidence: float
    iou_box: float
    dice: float
    accuracy: float
    bde: float  # nan when undefined (empty boundary)


@dataclass(frozen=True)
class MetricReport:
    dice: float
    accuracy: float
    bde: float
    mean_confidence: float
    confidence_half_width: float
    n_images: int
    n_detected: int
    n_bde_defined: int
    classification_accuracy: float

    def summary_lines(self) -> list[str]:
        return [
            "overall performance",
            f"  images evaluated      {self.n_images}",
            f"  detections            {self.n_detected}",
            f"  mean confidence       {self.mean_confidence:.4f} "
            f"(95% half-width {self.confidence_half_width:.4f})",
            f"  classification acc.   {self.classification_accuracy:.4f}",
            f"  dice score            {self.dice:.4f}",
            f"  accuracy              {self.accuracy:.4f}",
            f"  bde                   {self.bde:.4f}",
        ]


CSV_HEADER = [
    "image_id", "class_true", "class_pred", "confidence",
    "iou_box", "dice", "accuracy", "bde",
]


def write_results_csv(rows: list[ImageResult], path) -> None:
    """Deterministic per-image table; floats use shortest-round-trip %.9g."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([
                r.image_id, r.class_true, r.class_pred,
                f"{r.confidence:.9g}", f"{r.iou_box:.9g}",
                f"{r.dice:.9g}", f"{r.accuracy:.9g}",
                "" if math.isnan(r.bde) else f"{r.bde:.9g}",
            ])


def aggregate_results(rows: list[ImageResult]) -> MetricReport:
    """Fold per-image rows into the overall report."""
    if not rows:
        raise ValueError("no rows to aggregate")
    detected = [r for r in rows if r.confidence > 0.0]
    bde_vals = [r.bde for r in rows if not math.isnan(r.bde)]
    confs = [r.confidence for r in detected]
    if len(confs) >= 2:
        mean_conf, half = mean_confidence_interval(confs)
    elif confs:
        mean_conf, half = confs[0], float("nan")
    else:
        mean_conf, half = float("nan"), float("nan")
    return MetricReport(
        dice=float(np.mean([r.dice for r in rows])),
        accuracy=float(np.mean([r.accuracy for r in rows])),
        bde=float(np.mean(bde_vals)) if bde_vals else float("nan"),
        mean_confidence=mean_conf,
        confidence_half_width=half,
        n_images=len(rows),
        n_detected=len(detected),
        n_bde_defined=len(bde_vals),
        classification_accuracy=float(
            np.mean([r.class_true == r.class_pred for r in rows])
        ),
    )
