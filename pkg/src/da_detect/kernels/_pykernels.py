"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_ckernels.pyx`` mirrors every function
here with the same signature and must agree with it (bitwise for the integer
and box routines, to float rounding for the accumulating ones).
"""

import numpy as np


def iou_matrix(a, b):
    """Pairwise IoU between ``a`` [N, 4] and ``b`` [M, 4] (x1, y1, x2, y2)."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def nms_sorted(boxes, order, iou_threshold):
    """Greedy NMS over ``boxes`` visited in ``order``; returns kept indices."""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    order = np.asarray(order, dtype=np.int64)
    suppressed = np.zeros(len(boxes), dtype=bool)
    keep = []
    for pos, i in enumerate(order):
        if suppressed[i]:
            continue
        keep.append(i)
        rest = order[pos + 1:]
        rest = rest[~suppressed[rest]]
        if len(rest) == 0:
            continue
        ious = iou_matrix(boxes[i:i + 1], boxes[rest])[0]
        suppressed[rest[ious > iou_threshold]] = True
    return np.asarray(keep, dtype=np.int64)


def roi_pool_forward(fm, hstart, hend, wstart, wend):
    """Max-pool each ROI bin of ``fm`` [C, H, W].

    Bin edges are int arrays of shape [R, out_h] / [R, out_w], already clipped
    to the map. Empty bins produce 0 and argmax -1; argmax is a flat H*W index.
    """
    C, H, W = fm.shape
    R, oh = hstart.shape
    ow = wstart.shape[1]
    out = np.zeros((R, C, oh, ow), dtype=fm.dtype)
    argmax = np.full((R, C, oh, ow), -1, dtype=np.int64)
    for r in range(R):
        for i in range(oh):
            h0, h1 = hstart[r, i], hend[r, i]
            if h1 <= h0:
                continue
            for j in range(ow):
                w0, w1 = wstart[r, j], wend[r, j]
                if w1 <= w0:
                    continue
                patch = fm[:, h0:h1, w0:w1].reshape(C, -1)
                k = patch.argmax(axis=1)
                out[r, :, i, j] = patch[np.arange(C), k]
                bw = w1 - w0
                argmax[r, :, i, j] = (h0 + k // bw) * W + (w0 + k % bw)
    return out, argmax


def roi_pool_backward(grad_out, argmax, height, width):
    R, C, oh, ow = grad_out.shape
    grad = np.zeros((C, height * width), dtype=grad_out.dtype)
    chan = np.broadcast_to(np.arange(C)[None, :, None, None], argmax.shape)
    valid = argmax >= 0
    np.add.at(grad, (chan[valid], argmax[valid]), grad_out[valid])
    return grad.reshape(C, height, width)


def im2col(xp, kh, kw, stride):
    """Unfold padded input [N, C, Hp, Wp] into columns [N, C*kh*kw, Ho*Wo]."""
    N, C, Hp, Wp = xp.shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # N, C, Ho, Wo, kh, kw
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(N, C * kh * kw, Ho * Wo)
    return np.ascontiguousarray(cols)


def col2im(cols, shape, kh, kw, stride):
    """Adjoint of :func:`im2col`: scatter-add columns back to [N, C, Hp, Wp]."""
    N, C, Hp, Wp = shape
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    cols = cols.reshape(N, C, kh, kw, Ho, Wo)
    out = np.zeros(shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += cols[:, :, i, j]
    return out


FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data, h=FNV_OFFSET):
    """64-bit FNV-1a over a bytes-like object, continuing from ``h``."""
    for byte in memoryview(data).cast("B"):
        h = ((h ^ byte) * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h
