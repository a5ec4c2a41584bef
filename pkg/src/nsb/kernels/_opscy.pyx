# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: direct 3x3 convolution and 2x2 max pooling.

Same contracts and layouts as ops_np. Weights are transposed once per
call to (3, 3, C_in, C_out) so inner loops run over a contiguous
output-channel axis; accumulation goes through stack buffers, which the
C compiler can prove alias-free and therefore vectorize.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_CO = 256        # widest conv output supported by the stack buffers
DEF MAX_BLOCK = 4096    # widest ci*co weight block


def conv2d_fwd(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray b_arr):
    cdef const double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] wt = np.ascontiguousarray(
        w_arr.transpose(1, 2, 3, 0), dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], wd = x.shape[2], ci = x.shape[3]
    cdef Py_ssize_t co = wt.shape[3]
    cdef Py_ssize_t ho = h - 2, wo = wd - 2
    if co > MAX_CO:
        raise ValueError(f"conv2d_fwd supports up to {MAX_CO} output channels")
    out_arr = np.empty((n, ho, wo, co), dtype=np.float64)
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b_i, i, j, di, dj, c_in, c_out
    cdef double v
    cdef double acc[MAX_CO]
    with nogil:
        for b_i in range(n):
            for i in range(ho):
                for j in range(wo):
                    for c_out in range(co):
                        acc[c_out] = b[c_out]
                    for di in range(3):
                        for dj in range(3):
                            for c_in in range(ci):
                                v = x[b_i, i + di, j + dj, c_in]
                                for c_out in range(co):
                                    acc[c_out] += v * wt[di, dj, c_in, c_out]
                    for c_out in range(co):
                        out[b_i, i, j, c_out] = acc[c_out]
    return out_arr


def conv2d_bwd_input(cnp.ndarray dy_arr, cnp.ndarray w_arr, Py_ssize_t in_h, Py_ssize_t in_w):
    cdef const double[:, :, :, ::1] dy = np.ascontiguousarray(dy_arr, dtype=np.float64)
    cdef double[:, :, :, ::1] wt = np.ascontiguousarray(
        w_arr.transpose(1, 2, 3, 0), dtype=np.float64)
    cdef Py_ssize_t n = dy.shape[0], ho = dy.shape[1], wo = dy.shape[2], co = dy.shape[3]
    cdef Py_ssize_t ci = wt.shape[2]
    if co > MAX_CO:
        raise ValueError(f"conv2d_bwd_input supports up to {MAX_CO} output channels")
    dx_arr = np.zeros((n, in_h, in_w, ci), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b_i, i, j, di, dj, c_in, c_out
    cdef double s
    cdef double dyrow[MAX_CO]
    with nogil:
        for b_i in range(n):
            for i in range(ho):
                for j in range(wo):
                    for c_out in range(co):
                        dyrow[c_out] = dy[b_i, i, j, c_out]
                    for di in range(3):
                        for dj in range(3):
                            for c_in in range(ci):
                                s = 0.0
                                for c_out in range(co):
                                    s += dyrow[c_out] * wt[di, dj, c_in, c_out]
                                dx[b_i, i + di, j + dj, c_in] += s
    return dx_arr


def conv2d_bwd_weights(cnp.ndarray x_arr, cnp.ndarray dy_arr):
    cdef const double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef const double[:, :, :, ::1] dy = np.ascontiguousarray(dy_arr, dtype=np.float64)
    cdef Py_ssize_t n = dy.shape[0], ho = dy.shape[1], wo = dy.shape[2], co = dy.shape[3]
    cdef Py_ssize_t ci = x.shape[3]
    if co > MAX_CO or ci * co > MAX_BLOCK:
        raise ValueError("conv2d_bwd_weights kernel block exceeds the stack buffer")
    dwt_arr = np.zeros((3, 3, ci, co), dtype=np.float64)
    db_arr = np.zeros(co, dtype=np.float64)
    cdef double[:, :, :, ::1] dwt = dwt_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t b_i, i, j, di, dj, c_in, c_out, base
    cdef double v
    cdef double block[MAX_BLOCK]
    cdef double dbloc[MAX_CO]
    cdef double dyrow[MAX_CO]
    with nogil:
        for c_out in range(co):
            dbloc[c_out] = 0.0
        for b_i in range(n):
            for i in range(ho):
                for j in range(wo):
                    for c_out in range(co):
                        dbloc[c_out] += dy[b_i, i, j, c_out]
        for c_out in range(co):
            db[c_out] = dbloc[c_out]
        for di in range(3):
            for dj in range(3):
                for base in range(ci * co):
                    block[base] = 0.0
                for b_i in range(n):
                    for i in range(ho):
                        for j in range(wo):
                            for c_out in range(co):
                                dyrow[c_out] = dy[b_i, i, j, c_out]
                            for c_in in range(ci):
                                v = x[b_i, i + di, j + dj, c_in]
                                base = c_in * co
                                for c_out in range(co):
                                    block[base + c_out] += v * dyrow[c_out]
                for c_in in range(ci):
                    for c_out in range(co):
                        dwt[di, dj, c_in, c_out] = block[c_in * co + c_out]
    return np.ascontiguousarray(dwt_arr.transpose(3, 0, 1, 2)), db_arr


def maxpool2x2_fwd(cnp.ndarray x_arr):
    cdef const double[:, :, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t h2 = h // 2, w2 = w // 2
    out_arr = np.empty((n, h2, w2, c), dtype=np.float64)
    idx_arr = np.empty((n, h2, w2, c), dtype=np.uint8)
    cdef double[:, :, :, ::1] out = out_arr
    cdef unsigned char[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t b_i, i, j, ch, di, dj
    cdef double best, v
    cdef unsigned char best_k
    with nogil:
        for b_i in range(n):
            for i in range(h2):
                for j in range(w2):
                    for ch in range(c):
                        best = x[b_i, 2 * i, 2 * j, ch]
                        best_k = 0
                        for di in range(2):
                            for dj in range(2):
                                v = x[b_i, 2 * i + di, 2 * j + dj, ch]
                                if v > best:
                                    best = v
                                    best_k = <unsigned char> (2 * di + dj)
                        out[b_i, i, j, ch] = best
                        idx[b_i, i, j, ch] = best_k
    return out_arr, idx_arr


def maxpool2x2_bwd(cnp.ndarray dy_arr, cnp.ndarray idx_arr, Py_ssize_t in_h, Py_ssize_t in_w):
    cdef const double[:, :, :, ::1] dy = np.ascontiguousarray(dy_arr, dtype=np.float64)
    cdef const unsigned char[:, :, :, ::1] idx = np.ascontiguousarray(idx_arr, dtype=np.uint8)
    cdef Py_ssize_t n = dy.shape[0], h2 = dy.shape[1], w2 = dy.shape[2], c = dy.shape[3]
    dx_arr = np.zeros((n, in_h, in_w, c), dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef Py_ssize_t b_i, i, j, ch
    cdef unsigned char k
    with nogil:
        for b_i in range(n):
            for i in range(h2):
                for j in range(w2):
                    for ch in range(c):
                        k = idx[b_i, i, j, ch]
                        dx[b_i, 2 * i + (k >> 1), 2 * j + (k & 1), ch] += dy[b_i, i, j, ch]
    return dx_arr
