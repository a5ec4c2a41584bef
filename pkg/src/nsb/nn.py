"""Layer forward/backward passes shared by the classifier and detector.

Everything is float64 and explicitly batched (N, H, W, C). Backward
passes take the caches their forward produced; no autograd. The hot conv
and pool kernels dispatch through :mod:`nsb.kernels`.
"""

from __future__ import annotations

import math

import numpy as np

from nsb import kernels
from nsb.rng import DeterministicRng


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
        self.epoch = epoch


# ---------------------------------------------------------------- layers


def conv_forward(x, w, b, pad: int = 0):
    """3x3 conv, stride 1; optional zero padding of the input."""
    if x.shape[3] != w.shape[3]:
        raise ValueError(f"channel mismatch: input {x.shape[3]}, kernel {w.shape[3]}")
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    y = kernels.conv2d_fwd(x, w, b)
    return y, (x, w, pad)


def conv_backward(dy, cache):
    x, w, pad = cache
    dx = kernels.conv2d_bwd_input(dy, w, x.shape[1], x.shape[2])
    dw, db = kernels.conv2d_bwd_weights(x, dy)
    if pad:
        dx = dx[:, pad:-pad, pad:-pad, :]
    return dx, dw, db


def relu_forward(x):
    y = np.maximum(x, 0.0)
    return y, (x > 0.0)


def relu_backward(dy, cache):
    return dy * cache


def maxpool_forward(x):
    y, idx = kernels.maxpool2x2_fwd(x)
    return y, (idx, x.shape[1], x.shape[2])


def maxpool_backward(dy, cache):
    idx, in_h, in_w = cache
    return kernels.maxpool2x2_bwd(dy, idx, in_h, in_w)


def fc_forward(x2d, w, b):
    """Dense layer on (N, D) inputs with (D, K) weights."""
    return x2d @ w + b, x2d


def fc_backward(dy, cache, w):
    x2d = cache
    return dy @ w.T, x2d.T @ dy, dy.sum(axis=0)


def conv1x1_forward(x, w, b):
    """1x1 conv as a channel matmul; w is (Ci, Co)."""
    return x @ w + b, x


def conv1x1_backward(dy, cache, w):
    x = cache
    n, h, wd, ci = x.shape
    dyf = dy.reshape(-1, dy.shape[3])
    dw = x.reshape(-1, ci).T @ dyf
    return dy @ w.T, dw, dyf.sum(axis=0)


# ---------------------------------------------------------------- losses


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch.

    Returns (loss, dlogits); labels are integer class indices.
    """
    p = softmax(logits)
    n = logits.shape[0]
    eps = 1e-300  # guards log(0) for saturated wrong-class probabilities
    loss = -np.log(p[np.arange(n), labels] + eps).mean()
    dlogits = p.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_with_logits(logits, targets):
    """Mean binary cross-entropy on logits. Returns (loss, dlogits)."""
    # log(1 + e^-|z|) + max(z, 0) - z*t is the stable form
    loss = (np.logaddexp(0.0, -np.abs(logits)) + np.maximum(logits, 0.0)
            - logits * targets).mean()
    d = (sigmoid(logits) - targets) / logits.size
    return loss, d


def smooth_l1(diff):
    """Elementwise smooth-L1 (beta=1). Returns (values, dvalues)."""
    a = np.abs(diff)
    vals = np.where(a < 1.0, 0.5 * diff * diff, a - 0.5)
    grads = np.where(a < 1.0, diff, np.sign(diff))
    return vals, grads


# ------------------------------------------------------------- training


def glorot_uniform(shape, fan_in: int, fan_out: int, rng: DeterministicRng):
    r = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(int(np.prod(shape)), -r, r).reshape(shape)


class SgdMomentum:
    """Plain SGD with momentum over a name->array parameter dict."""

    def __init__(self, params: dict, lr: float, momentum: float = 0.9):
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.velocity = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict):
        for name, g in grads.items():
            v = self.velocity[name]
            v *= self.momentum
            v -= self.lr * g
            self.params[name] += v


def epoch_order(n: int, seed_rng: DeterministicRng, epoch: int) -> np.ndarray:
    """Deterministic shuffle of range(n) for one epoch."""
    return seed_rng.derive(0x5A, epoch).permutation(n)
