"""Anchor-based single-tumor localizer.

A small backbone (two padded conv+relu+pool blocks, 16 then 32 channels,
overall stride 4) feeds two 1x1 heads per feature cell: 9 objectness
logits and 36 box deltas (4 per anchor). The 9 anchors per cell are the
canonical 3 scales x 3 aspect ratios. Detection takes the top proposal
after NMS; boxes found at the 128x128 working resolution map back to the
512x512 native frame by a plain factor of 4.

Anchor flattening order is (row, col, anchor-index) C-order everywhere:
head channel layouts, assignment labels, and decoded box arrays all agree
with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nsb import nn, weights_io
from nsb.boxes import BBox, DegenerateBoxError, Detection, iou, iou_matrix
from nsb.imagecore import GrayImage
from nsb.rng import DeterministicRng

ANCHOR_SCALES = (16.0, 32.0, 64.0)
ANCHOR_RATIOS = (0.5, 1.0, 2.0)
ANCHORS_PER_CELL = 9
FEAT_STRIDE = 4
INPUT_SIZE = 128
RESOLUTION_RATIO = 4.0  # 512 / 128

IOU_POSITIVE = 0.7
IOU_NEGATIVE = 0.3
LABEL_POSITIVE = 1
LABEL_NEGATIVE = 0
LABEL_IGNORE = -1

NMS_IOU = 0.5
MIN_SCORE = 0.05
SAMPLE_POSITIVES = 32
SAMPLE_NEGATIVES = 32
HARD_NEGATIVES = 8


@dataclass(frozen=True)
class Anchor:
    cx: float
    cy: float
    width: float
    height: float
    row: int
    col: int
    index: int  # 0..8 within the cell

    def __post_init__(self):
        if not 0 <= self.index < ANCHORS_PER_CELL:
            raise ValueError(f"anchor index {self.index} outside [0, 9)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("anchor dimensions must be positive")

    def as_box(self) -> BBox:
        return BBox(
            self.cx - self.width / 2, self.cy - self.height / 2,
            self.cx + self.width / 2, self.cy + self.height / 2,
        )


def anchor_shapes() -> np.ndarray:
    """(9, 2) widths/heights: scale-major, ratio-minor order."""
    shapes = []
    for scale in ANCHOR_SCALES:
        for ratio in ANCHOR_RATIOS:
            shapes.append((scale * np.sqrt(ratio), scale / np.sqrt(ratio)))
    return np.array(shapes)


def anchor_grid(feat_h: int, feat_w: int, stride: float) -> np.ndarray:
    """All anchors as an (A, 4) array of (cx, cy, w, h), flattening order
    (row, col, anchor)."""
    if feat_h <= 0 or feat_w <= 0 or stride <= 0:
        raise ValueError("feature dims and stride must be positive")
    shapes = anchor_shapes()
    cx = (np.arange(feat_w) + 0.5) * stride
    cy = (np.arange(feat_h) + 0.5) * stride
    out = np.empty((feat_h, feat_w, ANCHORS_PER_CELL, 4))
    out[..., 0] = cx[None, :, None]
    out[..., 1] = cy[:, None, None]
    out[..., 2] = shapes[None, None, :, 0]
    out[..., 3] = shapes[None, None, :, 1]
    return out.reshape(-1, 4)


def generate_anchors(feat_h: int, feat_w: int, stride: float) -> list[Anchor]:
    grid = anchor_grid(feat_h, feat_w, stride)
    anchors = []
    for flat, (cx, cy, w, h) in enumerate(grid):
        cell, a = divmod(flat, ANCHORS_PER_CELL)
        row, col = divmod(cell, feat_w)
        anchors.append(Anchor(cx, cy, w, h, row, col, a))
    return anchors


def centers_to_corners(cwh: np.ndarray) -> np.ndarray:
    half_w = cwh[:, 2] / 2
    half_h = cwh[:, 3] / 2
    return np.stack(
        [cwh[:, 0] - half_w, cwh[:, 1] - half_h, cwh[:, 0] + half_w, cwh[:, 1] + half_h],
        axis=1,
    )


# ------------------------------------------------------------ box coding


def encode_deltas(anchor: Anchor, gt: BBox) -> np.ndarray:
    """Center/size log-space deltas (tx, ty, tw, th) from anchor to gt."""
    gx, gy = gt.center
    return np.array([
        (gx - anchor.cx) / anchor.width,
        (gy - anchor.cy) / anchor.height,
        np.log(gt.width / anchor.width),
        np.log(gt.height / anchor.height),
    ])


def decode_deltas(anchor: Anchor, deltas, image_size: float | None = None) -> BBox:
    """Exact inverse of encode_deltas, then optional clip to the frame."""
    tx, ty, tw, th = deltas
    cx = anchor.cx + tx * anchor.width
    cy = anchor.cy + ty * anchor.height
    w = anchor.width * np.exp(tw)
    h = anchor.height * np.exp(th)
    box = BBox(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
    if image_size is not None:
        box = box.clip(image_size, image_size)
    return box


def encode_deltas_array(anchors_cwh: np.ndarray, gt: BBox) -> np.ndarray:
    gx, gy = gt.center
    out = np.empty_like(anchors_cwh)
    out[:, 0] = (gx - anchors_cwh[:, 0]) / anchors_cwh[:, 2]
    out[:, 1] = (gy - anchors_cwh[:, 1]) / anchors_cwh[:, 3]
    out[:, 2] = np.log(gt.width / anchors_cwh[:, 2])
    out[:, 3] = np.log(gt.height / anchors_cwh[:, 3])
    return out


def decode_deltas_array(anchors_cwh: np.ndarray, deltas: np.ndarray) -> np.ndarray:
    """Vectorized decode to (A, 4) corner boxes, unclipped."""
    with np.errstate(over="ignore"):  # wild deltas from untrained heads
        cx = anchors_cwh[:, 0] + deltas[:, 0] * anchors_cwh[:, 2]
        cy = anchors_cwh[:, 1] + deltas[:, 1] * anchors_cwh[:, 3]
        w = anchors_cwh[:, 2] * np.exp(deltas[:, 2])
        h = anchors_cwh[:, 3] * np.exp(deltas[:, 3])
    return np.stack([cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2], axis=1)


# ------------------------------------------------------------ assignment


def assign_anchors(anchors_cwh: np.ndarray, gt: BBox) -> np.ndarray:
    """Label every anchor positive (1), negative (0), or ignore (-1).

    Positive: IoU >= 0.7, or being the (first) argmax-IoU anchor, which
    guarantees at least one positive. Negative: IoU <= 0.3 and not
    positive. Everything else is ignored.
    """
    corners = centers_to_corners(anchors_cwh)
    gt_row = np.array([gt.as_tuple()])
    ious = iou_matrix(corners, gt_row)[:, 0]
    labels = np.full(len(ious), LABEL_IGNORE, dtype=np.int8)
    labels[ious <= IOU_NEGATIVE] = LABEL_NEGATIVE
    labels[ious >= IOU_POSITIVE] = LABEL_POSITIVE
    labels[int(np.argmax(ious))] = LABEL_POSITIVE
    return labels


TRAIN_TOPK_POSITIVES = 4
TRAIN_POSITIVE_FLOOR = 0.3
TRAIN_NEGATIVE_CEIL = 0.15


def training_assignment(anchors_cwh: np.ndarray, gt: BBox):
    """Training targets for train_detector: dense soft objectness.

    The strict positive/negative/ignore split leaves the runner-up
    anchors (the ones that actually compete at detection time) with
    untrained scores and regressions, which wrecks held-out ranking on
    this small backbone. Training therefore regresses every sampled
    anchor's objectness toward its true IoU with the gt box, and trains
    box deltas on the top-k anchors by IoU (k=4, floored at IoU 0.3,
    argmax always included). The public assign_anchors op keeps the
    strict contract.

    Returns (pos_idx, ious): sorted flat indices of the regression
    anchors, plus every anchor's IoU (the soft objectness target).
    """
    corners = centers_to_corners(anchors_cwh)
    ious = iou_matrix(corners, np.array([gt.as_tuple()]))[:, 0]
    ranked = np.argsort(-ious, kind="stable")
    top = ranked[:TRAIN_TOPK_POSITIVES]
    pos = top[ious[top] >= TRAIN_POSITIVE_FLOOR]
    if pos.size == 0:
        pos = ranked[:1]
    return np.sort(pos), ious


# ------------------------------------------------------------------- NMS


def nms(dets: list[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS; ties in confidence break on smaller x_min, then y_min.

    Survivors with IoU strictly above the threshold against an already
    kept detection are suppressed. Output keeps descending-confidence
    order.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError(f"iou_threshold {iou_threshold} outside (0, 1)")
    pending = sorted(
        dets, key=lambda d: (-d.confidence, d.box.x_min, d.box.y_min)
    )
    kept: list[Detection] = []
    while pending:
        head = pending.pop(0)
        kept.append(head)
        pending = [d for d in pending if iou(head.box, d.box) <= iou_threshold]
    return kept


def _nms_indices(corners: np.ndarray, scores: np.ndarray, thr: float) -> list[int]:
    """Array variant of nms(); returns kept row indices in output order."""
    order = np.lexsort((corners[:, 1], corners[:, 0], -scores))
    kept: list[int] = []
    while order.size:
        i = int(order[0])
        kept.append(i)
        rest = order[1:]
        ious = iou_matrix(corners[i : i + 1], corners[rest])[0]
        order = rest[ious <= thr]
    return kept


# ------------------------------------------------------------- ROI pooling


def _bin_edges(n_cells: int, n_bins: int) -> list[tuple[int, int]]:
    # proportional rounding; every bin covers >= 1 cell (bins may overlap
    # when the span is smaller than the grid)
    edges = []
    for j in range(n_bins):
        start = (j * n_cells) // n_bins
        end = -(-(j + 1) * n_cells // n_bins)  # ceil
        if end <= start:
            end = start + 1
        edges.append((start, min(end, n_cells)))
    return edges


def roi_pool(feat: np.ndarray, roi: BBox, out_size: int = 7) -> np.ndarray:
    """Max-pool a feature-map region onto a fixed out_size x out_size grid.

    ``feat`` is (H, W, C) in feature coordinates; the roi is snapped
    outward to whole cells, then split into bins by proportional
    rounding.
    """
    h, w, c = feat.shape
    try:
        clipped = roi.clip(w, h)
    except DegenerateBoxError as exc:
        raise DegenerateBoxError(f"roi {roi} does not intersect the feature map") from exc
    c0, c1 = int(np.floor(clipped.x_min)), int(np.ceil(clipped.x_max))
    r0, r1 = int(np.floor(clipped.y_min)), int(np.ceil(clipped.y_max))
    c1 = min(max(c1, c0 + 1), w)
    r1 = min(max(r1, r0 + 1), h)
    c0 = min(c0, c1 - 1)
    r0 = min(r0, r1 - 1)
    out = np.empty((out_size, out_size, c))
    row_bins = _bin_edges(r1 - r0, out_size)
    col_bins = _bin_edges(c1 - c0, out_size)
    for bi, (rs, re) in enumerate(row_bins):
        for bj, (cs, ce) in enumerate(col_bins):
            window = feat[r0 + rs : r0 + re, c0 + cs : c0 + ce, :]
            out[bi, bj, :] = window.max(axis=(0, 1))
    return out


# ------------------------------------------------------ detector network


_SHAPES = {
    "det.conv1.w": (16, 3, 3, 1),
    "det.conv1.b": (16,),
    "det.conv2.w": (32, 3, 3, 16),
    "det.conv2.b": (32,),
    "det.obj.w": (32, 9),
    "det.obj.b": (9,),
    "det.reg.w": (32, 36),
    "det.reg.b": (36,),
}


@dataclass
class DetectorWeights:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    obj_w: np.ndarray
    obj_b: np.ndarray
    reg_w: np.ndarray
    reg_b: np.ndarray

    _FIELD_TO_NAME = {
        "conv1_w": "det.conv1.w",
        "conv1_b": "det.conv1.b",
        "conv2_w": "det.conv2.w",
        "conv2_b": "det.conv2.b",
        "obj_w": "det.obj.w",
        "obj_b": "det.obj.b",
        "reg_w": "det.reg.w",
        "reg_b": "det.reg.b",
    }

    def __post_init__(self):
        for field, name in self._FIELD_TO_NAME.items():
            arr = np.asarray(getattr(self, field), dtype=np.float64)
            if arr.shape != _SHAPES[name]:
                raise weights_io.WeightsShapeError(
                    name, f"shape {arr.shape}, expected {_SHAPES[name]}"
                )
            if not np.isfinite(arr).all():
                raise weights_io.WeightsShapeError(name, "contains non-finite values")
            setattr(self, field, arr)

    def as_dict(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, f) for f, name in self._FIELD_TO_NAME.items()}

    def is_all_zero(self) -> bool:
        return all(not v.any() for v in self.as_dict().values())

    @classmethod
    def from_dict(cls, tensors: dict[str, np.ndarray]) -> "DetectorWeights":
        picked = weights_io.take_tensors(tensors, _SHAPES)
        return cls(**{f: picked[name] for f, name in cls._FIELD_TO_NAME.items()})


def init_detector_weights(rng: DeterministicRng) -> DetectorWeights:
    r = rng.derive(0xD1)
    return DetectorWeights(
        conv1_w=nn.glorot_uniform((16, 3, 3, 1), 9 * 1, 9 * 16, r),
        conv1_b=np.zeros(16),
        conv2_w=nn.glorot_uniform((32, 3, 3, 16), 9 * 16, 9 * 32, r),
        conv2_b=np.zeros(32),
        obj_w=nn.glorot_uniform((32, 9), 32, 9, r),
        obj_b=np.zeros(9),
        reg_w=nn.glorot_uniform((32, 36), 32, 36, r),
        reg_b=np.zeros(36),
    )


def save_weights(w: DetectorWeights, path) -> None:
    weights_io.write_container(path, w.as_dict())


def load_weights(path) -> DetectorWeights:
    return DetectorWeights.from_dict(weights_io.read_container(path))


def detector_forward(x: np.ndarray, w: DetectorWeights, want_caches: bool = False):
    """Objectness logits and box deltas for a (N, S, S, 1) batch, S % 4 == 0.

    Returns (obj (N,S/4,S/4,9), reg (N,S/4,S/4,36), caches).
    """
    if x.ndim != 4 or x.shape[1] % FEAT_STRIDE or x.shape[2] % FEAT_STRIDE:
        raise ValueError(f"input shape {x.shape} not divisible by stride {FEAT_STRIDE}")
    a1, c_conv1 = nn.conv_forward(x, w.conv1_w, w.conv1_b, pad=1)
    r1, c_relu1 = nn.relu_forward(a1)
    p1, c_pool1 = nn.maxpool_forward(r1)
    a2, c_conv2 = nn.conv_forward(p1, w.conv2_w, w.conv2_b, pad=1)
    r2, c_relu2 = nn.relu_forward(a2)
    p2, c_pool2 = nn.maxpool_forward(r2)
    obj, c_obj = nn.conv1x1_forward(p2, w.obj_w, w.obj_b)
    reg, c_reg = nn.conv1x1_forward(p2, w.reg_w, w.reg_b)
    caches = (c_conv1, c_relu1, c_pool1, c_conv2, c_relu2, c_pool2, c_obj, c_reg) \
        if want_caches else None
    return obj, reg, caches


def detector_backward(dobj, dreg, caches, w: DetectorWeights) -> dict[str, np.ndarray]:
    c_conv1, c_relu1, c_pool1, c_conv2, c_relu2, c_pool2, c_obj, c_reg = caches
    dp2_a, dobj_w, dobj_b = nn.conv1x1_backward(dobj, c_obj, w.obj_w)
    dp2_b, dreg_w, dreg_b = nn.conv1x1_backward(dreg, c_reg, w.reg_w)
    dp2 = dp2_a + dp2_b
    dr2 = nn.maxpool_backward(dp2, c_pool2)
    da2 = nn.relu_backward(dr2, c_relu2)
    dp1, dconv2_w, dconv2_b = nn.conv_backward(da2, c_conv2)
    dr1 = nn.maxpool_backward(dp1, c_pool1)
    da1 = nn.relu_backward(dr1, c_relu1)
    _, dconv1_w, dconv1_b = nn.conv_backward(da1, c_conv1)
    return {
        "conv1_w": dconv1_w, "conv1_b": dconv1_b,
        "conv2_w": dconv2_w, "conv2_b": dconv2_b,
        "obj_w": dobj_w, "obj_b": dobj_b,
        "reg_w": dreg_w, "reg_b": dreg_b,
    }


def detector_loss_and_grads(
    x: np.ndarray, samples: list, w: DetectorWeights, forward=None
):
    """Sampled RPN loss and parameter gradients for one batch.

    ``samples`` holds one (pos_idx, other_idx, reg_targets, pos_ious,
    other_ious) tuple per image: flat anchor indices, encoded (n_pos, 4)
    regression targets, and soft objectness targets (each anchor's IoU
    with the gt box). Loss = class-balanced BCE on objectness against
    the soft targets (regression anchors and the rest each carry half
    the mass) plus smooth-L1 summed per box and averaged over the
    regression anchors. Pass a precomputed ``forward`` triple (obj,
    reg, caches) to reuse one.
    """
    obj, reg, caches = forward or detector_forward(x, w, want_caches=True)
    n = x.shape[0]
    n_anchors = obj.shape[1] * obj.shape[2] * ANCHORS_PER_CELL
    obj_flat = obj.reshape(n, n_anchors)
    reg_flat = reg.reshape(n, n_anchors, 4)

    all_logits, all_targets, pos_flags, owners, flat_ids = [], [], [], [], []
    pos_preds, pos_targets, pos_owner, pos_ids = [], [], [], []
    for i, (pos_idx, neg_idx, reg_targets, pos_ious, neg_ious) in enumerate(samples):
        sel = np.concatenate([pos_idx, neg_idx])
        all_logits.append(obj_flat[i, sel])
        all_targets.append(np.concatenate([pos_ious, neg_ious]))
        pos_flags.append(np.concatenate(
            [np.ones(len(pos_idx), bool), np.zeros(len(neg_idx), bool)]
        ))
        owners.append(np.full(len(sel), i))
        flat_ids.append(sel)
        pos_preds.append(reg_flat[i, pos_idx])
        pos_targets.append(reg_targets)
        pos_owner.append(np.full(len(pos_idx), i))
        pos_ids.append(pos_idx)
    logits = np.concatenate(all_logits)
    targets = np.concatenate(all_targets)
    is_pos = np.concatenate(pos_flags)
    n_t_pos = max(int(is_pos.sum()), 1)
    n_t_neg = max(len(is_pos) - int(is_pos.sum()), 1)
    sample_w = np.where(is_pos, 0.5 / n_t_pos, 0.5 / n_t_neg)
    per = (np.logaddexp(0.0, -np.abs(logits)) + np.maximum(logits, 0.0)
           - logits * targets)
    bce = float((per * sample_w).sum())
    dlogits = (nn.sigmoid(logits) - targets) * sample_w

    preds = np.concatenate(pos_preds)
    tgts = np.concatenate(pos_targets)
    n_pos = max(len(preds), 1)
    vals, dvals = nn.smooth_l1(preds - tgts)
    reg_loss = vals.sum() / n_pos
    dpreds = dvals / n_pos

    loss = bce + reg_loss
    dobj = np.zeros_like(obj_flat)
    dobj[np.concatenate(owners).astype(int), np.concatenate(flat_ids).astype(int)] = dlogits
    dreg = np.zeros_like(reg_flat)
    dreg[np.concatenate(pos_owner).astype(int), np.concatenate(pos_ids).astype(int)] = dpreds
    grads = detector_backward(
        dobj.reshape(obj.shape), dreg.reshape(reg.shape), caches, w
    )
    return loss, grads


@dataclass(frozen=True)
class DetectorTrainConfig:
    epochs: int = 8
    learning_rate: float = 0.01
    batch_size: int = 16
    momentum: float = 0.9
    seed: int = 0


def train_detector(
    images: np.ndarray, gt_boxes: list[BBox], config: DetectorTrainConfig
) -> tuple[DetectorWeights, list[float]]:
    """Train objectness + box regression on (N, 128, 128) normalized images.

    Each image carries exactly one ground-truth box in the 128x128 frame.
    Anchor labels and regression targets are fixed by geometry, so they
    are precomputed once; per-epoch sampling keeps up to 32 positives and
    32 negatives per image, drawn from seeded substreams.
    """
    n = images.shape[0]
    if n != len(gt_boxes):
        raise ValueError("one ground-truth box per image required")
    feat = images.shape[1] // FEAT_STRIDE
    anchors = anchor_grid(feat, feat, FEAT_STRIDE)
    assignments = []
    all_idx = np.arange(anchors.shape[0])
    for gt in gt_boxes:
        pos, ious = training_assignment(anchors, gt)
        others = all_idx[~np.isin(all_idx, pos)]
        assignments.append((pos, others, encode_deltas_array(anchors[pos], gt), ious))

    rng = DeterministicRng(config.seed)
    w = init_detector_weights(rng)
    params = {f: getattr(w, f) for f in w._FIELD_TO_NAME}
    opt = nn.SgdMomentum(params, config.learning_rate, config.momentum)
    x_all = images[:, :, :, None]
    trace: list[float] = []
    n_anchor_total = anchors.shape[0]
    for epoch in range(config.epochs):
        order = nn.epoch_order(n, rng, epoch)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            fwd = detector_forward(x_all[sel], w, want_caches=True)
            obj_flat = fwd[0].reshape(len(sel), n_anchor_total)
            samples = []
            for k, img_idx in enumerate(sel):
                pos, others, reg_targets, ious = assignments[img_idx]
                srng = rng.derive(0xD5, epoch, int(img_idx))
                if len(pos) > SAMPLE_POSITIVES:
                    keep = np.sort(srng.choice(len(pos), SAMPLE_POSITIVES))
                    pos, reg_targets = pos[keep], reg_targets[keep]
                # other anchors: 8 hardest (highest current score) + random rest
                sc = obj_flat[k, others]
                hard_order = np.argsort(-sc, kind="stable")
                hard = hard_order[:HARD_NEGATIVES]
                rest = np.sort(hard_order[HARD_NEGATIVES:])
                n_rand = SAMPLE_NEGATIVES - HARD_NEGATIVES
                rand = rest[srng.choice(len(rest), min(n_rand, len(rest)))]
                neg = np.sort(others[np.concatenate([hard, rand])])
                samples.append((pos, neg, reg_targets, ious[pos], ious[neg]))
            loss, grads = detector_loss_and_grads(x_all[sel], samples, w, forward=fwd)
            if not np.isfinite(loss):
                raise nn.TrainingDivergedError(epoch, loss)
            opt.step(grads)
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / n_batches)
    return w, trace


# --------------------------------------------------------------- detection


def detect(
    img: GrayImage,
    w: DetectorWeights,
    nms_iou: float = NMS_IOU,
    min_score: float = MIN_SCORE,
) -> Detection | None:
    """Best tumor detection for one normalized image, or None.

    Scores every anchor, decodes its box, clips to the frame, drops
    proposals under ``min_score``, and runs NMS; the highest-confidence
    survivor is the detection. None means "no tumor found" (nothing
    scored above the floor), which is a result, not an error.
    """
    if not img.is_normalized:
        raise ValueError("detector input must be normalized")
    size = img.height
    if img.width != size or size % FEAT_STRIDE:
        raise ValueError(f"expected square input divisible by {FEAT_STRIDE}")
    x = img.pixels[None, :, :, None]
    obj, reg, _ = detector_forward(x, w)
    n_anchors = obj.shape[1] * obj.shape[2] * ANCHORS_PER_CELL
    scores = nn.sigmoid(obj.reshape(n_anchors))
    deltas = reg.reshape(n_anchors, 4)
    anchors = anchor_grid(obj.shape[1], obj.shape[2], FEAT_STRIDE)

    keep = scores >= min_score
    if not keep.any():
        return None
    corners = decode_deltas_array(anchors[keep], deltas[keep])
    corners[:, 0::2] = np.clip(corners[:, 0::2], 0.0, float(size))
    corners[:, 1::2] = np.clip(corners[:, 1::2], 0.0, float(size))
    valid = (corners[:, 2] > corners[:, 0]) & (corners[:, 3] > corners[:, 1])
    if not valid.any():
        return None
    corners = corners[valid]
    kept_scores = scores[keep][valid]
    survivors = _nms_indices(corners, kept_scores, nms_iou)
    best = survivors[0]
    return Detection(
        BBox(*corners[best]), float(kept_scores[best])
    )


def map_box_to_original(box: BBox) -> BBox:
    """128x128-frame box to the native 512x512 frame (multiply by 4)."""
    return box.scaled(RESOLUTION_RATIO)


def map_box_from_original(box: BBox) -> BBox:
    """Inverse of map_box_to_original (divide by 4)."""
    return box.scaled(1.0 / RESOLUTION_RATIO)
