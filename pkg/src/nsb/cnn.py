"""Shallow two-block CNN that labels a slice as meningioma or glioma.

Architecture at the native 128x128 input, valid convolutions throughout:

    128x128x1 -> conv 3x3 x20 -> relu -> pool -> 63x63x20
              -> conv 3x3 x10 -> relu -> pool -> 30x30x10
              -> flatten 9000 -> fc -> 2 logits -> softmax

Flattening is C-order over (row, col, channel). Argmax ties resolve to
meningioma (class index 0), making classification a total function.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from nsb import nn, weights_io
from nsb.imagecore import GrayImage
from nsb.rng import DeterministicRng

INPUT_SIZE = 128
FLAT_FEATURES = 9000  # 30 * 30 * 10


class TumorClass(Enum):
    MENINGIOMA = "meningioma"
    GLIOMA = "glioma"

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)


CLASS_ORDER = (TumorClass.MENINGIOMA, TumorClass.GLIOMA)

_SHAPES = {
    "cls.conv1.w": (20, 3, 3, 1),
    "cls.conv1.b": (20,),
    "cls.conv2.w": (10, 3, 3, 20),
    "cls.conv2.b": (10,),
    "cls.fc.w": (FLAT_FEATURES, 2),
    "cls.fc.b": (2,),
}


@dataclass
class ClassifierWeights:
    conv1_w: np.ndarray
    conv1_b: np.ndarray
    conv2_w: np.ndarray
    conv2_b: np.ndarray
    fc_w: np.ndarray
    fc_b: np.ndarray

    _FIELD_TO_NAME = {
        "conv1_w": "cls.conv1.w",
        "conv1_b": "cls.conv1.b",
        "conv2_w": "cls.conv2.w",
        "conv2_b": "cls.conv2.b",
        "fc_w": "cls.fc.w",
        "fc_b": "cls.fc.b",
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
    def from_dict(cls, tensors: dict[str, np.ndarray]) -> "ClassifierWeights":
        picked = weights_io.take_tensors(tensors, _SHAPES)
        return cls(**{f: picked[name] for f, name in cls._FIELD_TO_NAME.items()})


def init_classifier_weights(rng: DeterministicRng) -> ClassifierWeights:
    """Glorot-uniform kernels, zero biases, all from the seeded stream."""
    r = rng.derive(0xC1)
    return ClassifierWeights(
        conv1_w=nn.glorot_uniform((20, 3, 3, 1), 9 * 1, 9 * 20, r),
        conv1_b=np.zeros(20),
        conv2_w=nn.glorot_uniform((10, 3, 3, 20), 9 * 20, 9 * 10, r),
        conv2_b=np.zeros(10),
        fc_w=nn.glorot_uniform((FLAT_FEATURES, 2), FLAT_FEATURES, 2, r),
        fc_b=np.zeros(2),
    )


def save_weights(w: ClassifierWeights, path) -> None:
    weights_io.write_container(path, w.as_dict())


def load_weights(path) -> ClassifierWeights:
    return ClassifierWeights.from_dict(weights_io.read_container(path))


# ---------------------------------------------------------------- forward


def forward_batch(x: np.ndarray, w: ClassifierWeights, want_caches: bool = False):
    """Logits for a (N, 128, 128, 1) normalized batch.

    Returns (logits, caches); caches feed backward_batch. Intermediate
    shapes: 126x126x20 -> 63x63x20 -> 61x61x10 -> 30x30x10 -> 9000 -> 2.
    """
    if x.ndim != 4 or x.shape[1:] != (INPUT_SIZE, INPUT_SIZE, 1):
        raise ValueError(f"expected (N, 128, 128, 1) input, got {x.shape}")
    a1, c_conv1 = nn.conv_forward(x, w.conv1_w, w.conv1_b)
    r1, c_relu1 = nn.relu_forward(a1)
    p1, c_pool1 = nn.maxpool_forward(r1)
    a2, c_conv2 = nn.conv_forward(p1, w.conv2_w, w.conv2_b)
    r2, c_relu2 = nn.relu_forward(a2)
    p2, c_pool2 = nn.maxpool_forward(r2)
    flat = p2.reshape(p2.shape[0], -1)
    logits, c_fc = nn.fc_forward(flat, w.fc_w, w.fc_b)
    caches = None
    if want_caches:
        caches = (c_conv1, c_relu1, c_pool1, c_conv2, c_relu2, c_pool2, c_fc,
                  p2.shape)
    return logits, caches


def backward_batch(dlogits, caches, w: ClassifierWeights) -> dict[str, np.ndarray]:
    c_conv1, c_relu1, c_pool1, c_conv2, c_relu2, c_pool2, c_fc, p2_shape = caches
    dflat, dfc_w, dfc_b = nn.fc_backward(dlogits, c_fc, w.fc_w)
    dp2 = dflat.reshape(p2_shape)
    dr2 = nn.maxpool_backward(dp2, c_pool2)
    da2 = nn.relu_backward(dr2, c_relu2)
    dp1, dconv2_w, dconv2_b = nn.conv_backward(da2, c_conv2)
    dr1 = nn.maxpool_backward(dp1, c_pool1)
    da1 = nn.relu_backward(dr1, c_relu1)
    _, dconv1_w, dconv1_b = nn.conv_backward(da1, c_conv1)
    return {
        "conv1_w": dconv1_w, "conv1_b": dconv1_b,
        "conv2_w": dconv2_w, "conv2_b": dconv2_b,
        "fc_w": dfc_w, "fc_b": dfc_b,
    }


def forward_classify(img: GrayImage, w: ClassifierWeights):
    """Class probabilities and label for one normalized 128x128 image."""
    if not img.is_normalized:
        raise ValueError("classifier input must be normalized")
    if (img.height, img.width) != (INPUT_SIZE, INPUT_SIZE):
        raise ValueError(f"expected {INPUT_SIZE}x{INPUT_SIZE}, got {img.width}x{img.height}")
    x = img.pixels[None, :, :, None]
    logits, _ = forward_batch(x, w)
    probs = nn.softmax(logits)[0]
    label = CLASS_ORDER[int(np.argmax(probs))]  # tie -> meningioma (index 0)
    return probs, label


# ---------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 8
    learning_rate: float = 0.01
    batch_size: int = 16
    momentum: float = 0.9
    seed: int = 0


def train_classifier(
    images: np.ndarray, labels: np.ndarray, config: TrainConfig
) -> tuple[ClassifierWeights, list[float]]:
    """Mini-batch SGD with momentum on mean cross-entropy.

    ``images`` is (N, 128, 128) normalized float64; ``labels`` holds class
    indices. Deterministic given the seed: fixed init, fixed shuffles.
    Returns the final weights and the per-epoch mean loss trace.
    """
    labels = np.asarray(labels)
    counts = np.bincount(labels, minlength=2)
    if counts.min() < 2:
        raise ValueError(f"need at least 2 examples per class, got counts {counts}")
    rng = DeterministicRng(config.seed)
    w = init_classifier_weights(rng)
    params = {f: getattr(w, f) for f in w._FIELD_TO_NAME}
    opt = nn.SgdMomentum(params, config.learning_rate, config.momentum)
    x_all = images[:, :, :, None]
    n = x_all.shape[0]
    trace: list[float] = []
    for epoch in range(config.epochs):
        order = nn.epoch_order(n, rng, epoch)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            logits, caches = forward_batch(x_all[sel], w, want_caches=True)
            loss, dlogits = nn.softmax_cross_entropy(logits, labels[sel])
            if not np.isfinite(loss):
                raise nn.TrainingDivergedError(epoch, loss)
            grads = backward_batch(dlogits, caches, w)
            opt.step(grads)
            epoch_loss += loss
            n_batches += 1
        trace.append(epoch_loss / n_batches)
    return w, trace
