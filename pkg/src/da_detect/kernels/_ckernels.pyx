# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp
from cython cimport floating

cnp.import_array()


cdef inline double _iou(double ax1, double ay1, double ax2, double ay2,
                        double bx1, double by1, double bx2, double by2) noexcept nogil:
    cdef double iw = min(ax2, bx2) - max(ax1, bx1)
    cdef double ih = min(ay2, by2) - max(ay1, by1)
    if iw < 0.0:
        iw = 0.0
    if ih < 0.0:
        ih = 0.0
    cdef double inter = iw * ih
    cdef double union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union > 0.0:
        return inter / union
    return 0.0


def iou_matrix(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = _iou(av[i, 0], av[i, 1], av[i, 2], av[i, 3],
                                bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3])
    return out


def nms_sorted(boxes, order, double iou_threshold):
    cdef const double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef const cnp.int64_t[::1] ov = np.ascontiguousarray(order, dtype=np.int64)
    cdef Py_ssize_t n = ov.shape[0], p, q, i, j, nkeep = 0
    sup = np.zeros(bv.shape[0], dtype=np.uint8)
    keep = np.empty(n, dtype=np.int64)
    cdef unsigned char[::1] sv = sup
    cdef cnp.int64_t[::1] kv = keep
    with nogil:
        for p in range(n):
            i = ov[p]
            if sv[i]:
                continue
            kv[nkeep] = i
            nkeep += 1
            for q in range(p + 1, n):
                j = ov[q]
                if sv[j]:
                    continue
                if _iou(bv[i, 0], bv[i, 1], bv[i, 2], bv[i, 3],
                        bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3]) > iou_threshold:
                    sv[j] = 1
    return keep[:nkeep].copy()


def _roi_pool_forward(const floating[:, :, ::1] fm,
                      const cnp.int64_t[:, ::1] hstart, const cnp.int64_t[:, ::1] hend,
                      const cnp.int64_t[:, ::1] wstart, const cnp.int64_t[:, ::1] wend,
                      floating[:, :, :, ::1] out, cnp.int64_t[:, :, :, ::1] argmax):
    cdef Py_ssize_t C = fm.shape[0], W = fm.shape[2]
    cdef Py_ssize_t R = hstart.shape[0], oh = hstart.shape[1], ow = wstart.shape[1]
    cdef Py_ssize_t r, c, i, j, h, w, h0, h1, w0, w1, best
    cdef floating v, bestv
    with nogil:
        for r in range(R):
            for c in range(C):
                for i in range(oh):
                    h0 = hstart[r, i]
                    h1 = hend[r, i]
                    for j in range(ow):
                        w0 = wstart[r, j]
                        w1 = wend[r, j]
                        if h1 <= h0 or w1 <= w0:
                            argmax[r, c, i, j] = -1
                            out[r, c, i, j] = 0
                            continue
                        best = h0 * W + w0
                        bestv = fm[c, h0, w0]
                        for h in range(h0, h1):
                            for w in range(w0, w1):
                                v = fm[c, h, w]
                                if v > bestv:
                                    bestv = v
                                    best = h * W + w
                        out[r, c, i, j] = bestv
                        argmax[r, c, i, j] = best


def roi_pool_forward(fm, hstart, hend, wstart, wend):
    fm = np.ascontiguousarray(fm)
    C = fm.shape[0]
    R, oh = hstart.shape
    ow = wstart.shape[1]
    out = np.zeros((R, C, oh, ow), dtype=fm.dtype)
    argmax = np.full((R, C, oh, ow), -1, dtype=np.int64)
    if R:
        _roi_pool_forward(fm,
                          np.ascontiguousarray(hstart, dtype=np.int64),
                          np.ascontiguousarray(hend, dtype=np.int64),
                          np.ascontiguousarray(wstart, dtype=np.int64),
                          np.ascontiguousarray(wend, dtype=np.int64),
                          out, argmax)
    return out, argmax


def _roi_pool_backward(const floating[:, :, :, ::1] g, const cnp.int64_t[:, :, :, ::1] argmax,
                       floating[:, ::1] grad):
    cdef Py_ssize_t R = g.shape[0], C = g.shape[1], oh = g.shape[2], ow = g.shape[3]
    cdef Py_ssize_t r, c, i, j, k
    with nogil:
        for r in range(R):
            for c in range(C):
                for i in range(oh):
                    for j in range(ow):
                        k = argmax[r, c, i, j]
                        if k >= 0:
                            grad[c, k] += g[r, c, i, j]


def roi_pool_backward(grad_out, argmax, height, width):
    grad_out = np.ascontiguousarray(grad_out)
    C = grad_out.shape[1]
    grad = np.zeros((C, height * width), dtype=grad_out.dtype)
    if grad_out.shape[0]:
        _roi_pool_backward(grad_out, np.ascontiguousarray(argmax, dtype=np.int64), grad)
    return grad.reshape(C, height, width)


def _im2col(const floating[:, :, :, ::1] xp, floating[:, :, ::1] cols,
            Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t Ho, Py_ssize_t Wo):
    cdef Py_ssize_t N = xp.shape[0], C = xp.shape[1]
    cdef Py_ssize_t n, c, i, j, a, b, row
    with nogil:
        for n in range(N):
            for c in range(C):
                for i in range(kh):
                    for j in range(kw):
                        row = (c * kh + i) * kw + j
                        for a in range(Ho):
                            for b in range(Wo):
                                cols[n, row, a * Wo + b] = xp[n, c, a * stride + i, b * stride + j]


def im2col(xp, kh, kw, stride):
    xp = np.ascontiguousarray(xp)
    N, C, Hp, Wp = xp.shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    cols = np.empty((N, C * kh * kw, Ho * Wo), dtype=xp.dtype)
    _im2col(xp, cols, kh, kw, stride, Ho, Wo)
    return cols


def _col2im(const floating[:, :, ::1] cols, floating[:, :, :, ::1] out,
            Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t stride, Py_ssize_t Ho, Py_ssize_t Wo):
    cdef Py_ssize_t N = out.shape[0], C = out.shape[1]
    cdef Py_ssize_t n, c, i, j, a, b, row
    with nogil:
        for n in range(N):
            for c in range(C):
                for i in range(kh):
                    for j in range(kw):
                        row = (c * kh + i) * kw + j
                        for a in range(Ho):
                            for b in range(Wo):
                                out[n, c, a * stride + i, b * stride + j] += cols[n, row, a * Wo + b]


def col2im(cols, shape, kh, kw, stride):
    N, C, Hp, Wp = shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    cols = np.ascontiguousarray(cols).reshape(N, C * kh * kw, Ho * Wo)
    out = np.zeros(shape, dtype=cols.dtype)
    _col2im(cols, out, kh, kw, stride, Ho, Wo)
    return out


def fnv1a64(data, h=0xCBF29CE484222325):
    cdef const unsigned char[::1] buf = memoryview(data).cast("B")
    cdef unsigned long long acc = h
    cdef unsigned long long prime = 0x100000001B3
    cdef Py_ssize_t i, n = buf.shape[0]
    with nogil:
        for i in range(n):
            acc = (acc ^ buf[i]) * prime
    return acc
