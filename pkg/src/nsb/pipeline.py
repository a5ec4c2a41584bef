"""End-to-end composition: classify, localize, map, segment, score.

The pipeline mirrors the deployment path: native 512x512 image ->
block-mean downsample to 128x128 -> normalize -> classifier + detector ->
box mapped back to 512x512 (with a small safety margin so a slightly
tight box cannot sever the edge ring) -> Prewitt segmentation inside the
box. ``evaluate_dataset`` runs it over a manifest and aggregates the
objective metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nsb import cnn, localizer, metrics, segmenter
from nsb.boxes import BBox, Detection, iou
from nsb.cnn import ClassifierWeights, TumorClass
from nsb.imagecore import GrayImage, downsample, normalize, read_image
from nsb.localizer import DetectorWeights
from nsb.phantom import DatasetManifest, ManifestEntry, load_entry_mask

SEG_BOX_MARGIN = 0.08  # fraction of box size added per side before segmenting


class UntrainedWeightsError(ValueError):
    """All-zero weights passed where trained weights are required."""


@dataclass(frozen=True)
class PipelineResult:
    label: TumorClass
    probabilities: np.ndarray
    detection: Detection | None  # box in the 128x128 frame
    box_native: BBox | None      # margin-expanded box in the native frame
    mask: np.ndarray
    boundary: np.ndarray


class TumorPipeline:
    """Weights-backed implementation of the three pipeline stages."""

    def __init__(
        self,
        classifier: ClassifierWeights,
        detector: DetectorWeights,
        nms_iou: float = localizer.NMS_IOU,
        min_score: float = localizer.MIN_SCORE,
        seg_margin: float = SEG_BOX_MARGIN,
    ):
        if classifier.is_all_zero() or detector.is_all_zero():
            raise UntrainedWeightsError("refusing to evaluate all-zero weights")
        self.classifier = classifier
        self.detector = detector
        self.nms_iou = nms_iou
        self.min_score = min_score
        self.seg_margin = seg_margin

    def classify(self, img128: GrayImage):
        return cnn.forward_classify(img128, self.classifier)

    def detect(self, img128: GrayImage) -> Detection | None:
        return localizer.detect(
            img128, self.detector, nms_iou=self.nms_iou, min_score=self.min_score
        )

    def segment(self, img_native: GrayImage, box_native: BBox):
        return segmenter.segment_roi(img_native, box_native)


def prepare_input(img_native: GrayImage) -> GrayImage:
    """Native image to the normalized 128x128 network input."""
    small = downsample(img_native, cnn.INPUT_SIZE, cnn.INPUT_SIZE)
    return normalize(small)


def run_single(img_native: GrayImage, pipeline: TumorPipeline) -> PipelineResult:
    """Full pipeline over one native-resolution image."""
    img128 = prepare_input(img_native)
    probs, label = pipeline.classify(img128)
    det = pipeline.detect(img128)
    if det is None:
        empty = np.zeros((img_native.height, img_native.width), dtype=bool)
        return PipelineResult(label, probs, None, None, empty, np.empty((0, 2), int))
    box_native = localizer.map_box_to_original(det.box).expanded(
        pipeline.seg_margin, img_native.width, img_native.height
    )
    mask, boundary = pipeline.segment(img_native, box_native)
    return PipelineResult(label, probs, det, box_native, mask, boundary)


# -------------------------------------------------------------- evaluation


def evaluate_entry(
    manifest: DatasetManifest, entry: ManifestEntry, pipeline: TumorPipeline
) -> metrics.ImageResult:
    img = read_image(manifest.abspath(entry.image_path))
    gt_mask = load_entry_mask(manifest, entry)
    result = run_single(img, pipeline)
    c = metrics.confusion_counts(result.mask, gt_mask)
    if result.detection is not None:
        det_native = localizer.map_box_to_original(result.detection.box)
        box_iou = iou(det_native, entry.box)
        confidence = result.detection.confidence
    else:
        box_iou, confidence = 0.0, 0.0
    try:
        bde_val = metrics.bde(result.boundary, segmenter.extract_boundary(gt_mask))
    except metrics.EmptyBoundaryError:
        bde_val = float("nan")
    return metrics.ImageResult(
        image_id=entry.image_path.rsplit(".", 1)[0],
        class_true=entry.class_label.value,
        class_pred=result.label.value,
        confidence=confidence,
        iou_box=box_iou,
        dice=metrics.dice(c),
        accuracy=metrics.accuracy(c),
        bde=bde_val,
    )


def evaluate_dataset(
    manifest: DatasetManifest,
    pipeline: TumorPipeline,
    entries: list[ManifestEntry] | None = None,
) -> tuple[metrics.MetricReport, list[metrics.ImageResult]]:
    """Run the pipeline over manifest entries and aggregate the metrics.

    ``entries`` restricts evaluation to a subset (e.g. one fold's test
    set); rows come back in manifest order.
    """
    chosen = list(entries) if entries is not None else list(manifest.entries)
    if not chosen:
        raise ValueError("no entries to evaluate")
    rows = [evaluate_entry(manifest, e, pipeline) for e in chosen]
    return metrics.aggregate_results(rows), rows


# ------------------------------------------------------- training plumbing


def load_training_arrays(manifest: DatasetManifest, entries=None):
    """Manifest entries to stacked network inputs.

    Returns (images_128 (N,128,128) float64, labels (N,), boxes_128) with
    ground-truth boxes mapped into the 128x128 frame.
    """
    chosen = list(entries) if entries is not None else list(manifest.entries)
    images = np.empty((len(chosen), cnn.INPUT_SIZE, cnn.INPUT_SIZE))
    labels = np.empty(len(chosen), dtype=np.int64)
    boxes = []
    for i, entry in enumerate(chosen):
        img = read_image(manifest.abspath(entry.image_path))
        images[i] = prepare_input(img).pixels
        labels[i] = entry.class_label.index
        boxes.append(localizer.map_box_from_original(entry.box))
    return images, labels, boxes


# ----------------------------------------------------------------- overlays


def render_overlay(img: GrayImage, boundary: np.ndarray) -> GrayImage:
    """Boundary pixels burned in at maximum intensity (stays a valid PGM)."""
    px = img.pixels.copy()
    if boundary.size:
        px[boundary[:, 0], boundary[:, 1]] = 255
    return GrayImage(px)


def decoy_box(box: BBox, frame_w: float, frame_h: float) -> BBox:
    """Deliberately wrong box: shifted sideways by half its width.

    Shifts right when that stays in frame, otherwise left, producing a
    plausible but offset segmentation region.
    """
    dx = box.width / 2.0
    if box.x_max + dx <= frame_w:
        shifted = BBox(box.x_min + dx, box.y_min, box.x_max + dx, box.y_max)
    else:
        shifted = BBox(box.x_min - dx, box.y_min, box.x_max - dx, box.y_max)
    return shifted.clip(frame_w, frame_h)
