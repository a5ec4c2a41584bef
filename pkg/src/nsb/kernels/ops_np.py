"""Numpy fallback for the hot kernels.

Convolutions lower to one im2col GEMM per call (windows gathered with
stride tricks, flattened once, multiplied by a reshaped kernel matrix).
Layouts match the compiled backend exactly: activations are (N, H, W, C)
float64, conv weights are (C_out, 3, 3, C_in).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(x: np.ndarray) -> np.ndarray:
    """(N, Ho, Wo, 3, 3, Ci) view of all 3x3 patches."""
    # sliding_window_view yields (N, Ho, Wo, Ci, 3, 3); put taps before channels
    return sliding_window_view(x, (3, 3), axis=(1, 2)).transpose(0, 1, 2, 4, 5, 3)


def conv2d_fwd(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid 3x3 convolution, stride 1. (N,H,W,Ci) -> (N,H-2,W-2,Co)."""
    n, h, wd, ci = x.shape
    co = w.shape[0]
    ho, wo = h - 2, wd - 2
    if ci <= 2:
        # thin inputs: one im2col GEMM beats nine outer-product GEMMs
        cols = _windows(x).reshape(n * ho * wo, 9 * ci)
        out = cols @ w.transpose(1, 2, 3, 0).reshape(9 * ci, co)
        out += b
        return out.reshape(n, ho, wo, co)
    out = np.empty((n * ho * wo, co))
    out[:] = b
    for di in range(3):
        for dj in range(3):
            patch = x[:, di : di + ho, dj : dj + wo, :].reshape(-1, ci)
            out += patch @ w[:, di, dj, :].T
    return out.reshape(n, ho, wo, co)


def conv2d_bwd_input(dy: np.ndarray, w: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    """Gradient w.r.t. the conv input, scattered tap by tap."""
    n, ho, wo, co = dy.shape
    ci = w.shape[3]
    dx = np.zeros((n, in_h, in_w, ci))
    dyf = dy.reshape(-1, co)
    for di in range(3):
        for dj in range(3):
            contrib = dyf @ w[:, di, dj, :]
            dx[:, di : di + ho, dj : dj + wo, :] += contrib.reshape(n, ho, wo, ci)
    return dx


def conv2d_bwd_weights(x: np.ndarray, dy: np.ndarray):
    """Gradients w.r.t. conv weights and bias."""
    n, ho, wo, co = dy.shape
    ci = x.shape[3]
    dyf = dy.reshape(-1, co)
    dw = np.empty((co, 3, 3, ci))
    for di in range(3):
        for dj in range(3):
            patch = x[:, di : di + ho, dj : dj + wo, :].reshape(-1, ci)
            dw[:, di, dj, :] = dyf.T @ patch
    return dw, dyf.sum(axis=0)


def maxpool2x2_fwd(x: np.ndarray):
    """Non-overlapping 2x2 max pool; trailing odd row/col dropped.

    Returns (pooled, idx) where idx in {0,1,2,3} records the argmax
    position in window order (0,0),(0,1),(1,0),(1,1); ties go to the
    first, so gradient routing is deterministic.
    """
    n, h, w, c = x.shape
    h2, w2 = h // 2, w // 2
    xt = x[:, : 2 * h2, : 2 * w2, :].reshape(n, h2, 2, w2, 2, c)
    cand = np.ascontiguousarray(xt.transpose(0, 1, 3, 5, 2, 4)).reshape(
        n, h2, w2, c, 4
    )
    idx = cand.argmax(axis=4)
    pooled = np.take_along_axis(cand, idx[..., None], axis=4)[..., 0]
    return pooled, idx.astype(np.uint8)


def maxpool2x2_bwd(dy: np.ndarray, idx: np.ndarray, in_h: int, in_w: int) -> np.ndarray:
    """Route pooled gradients back to their argmax positions."""
    n, h2, w2, c = dy.shape
    scat = np.zeros((n, h2, w2, c, 4))
    np.put_along_axis(scat, idx[..., None].astype(np.intp), dy[..., None], axis=4)
    dx = np.zeros((n, in_h, in_w, c))
    dx[:, : 2 * h2, : 2 * w2, :] = (
        scat.reshape(n, h2, w2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
    ).reshape(n, 2 * h2, 2 * w2, c)
    return dx
