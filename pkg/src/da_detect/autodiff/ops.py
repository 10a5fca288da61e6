"""Differentiable primitives.

Only scalar-with-tensor broadcasting is supported; everything else needs
matching shapes. Each op computes its forward value with numpy and records a
closure that maps the upstream gradient to per-input gradients.
"""

import numpy as np

from .. import kernels
from .tensor import ShapeError, Tensor, record


def _wants(t):
    return isinstance(t, Tensor) and t.requires_grad


def _as_tensor(x, like=None):
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _is_scalar(t):
    return t.data.ndim == 0 or t.data.size == 1 and t.data.ndim <= 1


def _check_binary(a, b, name):
    if a.shape != b.shape and not (_is_scalar(a) or _is_scalar(b)):
        raise ShapeError(f"{name}: shapes {a.shape} and {b.shape} differ and neither is a scalar")


def _unbroadcast(g, t):
    if g.shape == t.shape:
        return g
    return np.asarray(g.sum(), dtype=g.dtype).reshape(t.shape)


def _result_shape(a, b):
    if a.shape == b.shape:
        return a.shape
    return b.shape if _is_scalar(a) else a.shape


def add(a, b):
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    _check_binary(a, b, "add")
    shape = _result_shape(a, b)
    out = Tensor((a.data + b.data).reshape(shape))

    def backward(g):
        return (_unbroadcast(g, a) if _wants(a) else None,
                _unbroadcast(g, b) if _wants(b) else None)

    return record("add", (a, b), out, backward)


def sub(a, b):
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    _check_binary(a, b, "sub")
    shape = _result_shape(a, b)
    out = Tensor((a.data - b.data).reshape(shape))

    def backward(g):
        return (_unbroadcast(g, a) if _wants(a) else None,
                _unbroadcast(-g, b) if _wants(b) else None)

    return record("sub", (a, b), out, backward)


def mul(a, b):
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    _check_binary(a, b, "mul")
    shape = _result_shape(a, b)
    out = Tensor((a.data * b.data).reshape(shape))

    def backward(g):
        ga = _unbroadcast((g * b.data).reshape(shape), a) if _wants(a) else None
        gb = _unbroadcast((g * a.data).reshape(shape), b) if _wants(b) else None
        return ga, gb

    return record("mul", (a, b), out, backward)


def matmul(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    out = Tensor(a.data @ b.data)

    def backward(g):
        return (g @ b.data.T if _wants(a) else None,
                a.data.T @ g if _wants(b) else None)

    return record("matmul", (a, b), out, backward)


def linear(x, w, b):
    """Affine map ``x @ w + b`` for x [N, D], w [D, O], b [O]."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    if b.shape != (w.shape[1],):
        raise ShapeError(f"linear: bias {b.shape} does not match {w.shape[1]} outputs")
    out = Tensor(x.data @ w.data + b.data)

    def backward(g):
        return (g @ w.data.T if _wants(x) else None,
                x.data.T @ g if _wants(w) else None,
                g.sum(axis=0) if _wants(b) else None)

    return record("linear", (x, w, b), out, backward)


def relu(x):
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0).astype(x.data.dtype))
    return record("relu", (x,), out, lambda g: (g * mask,))


def sigmoid(x):
    z = x.data
    e = np.exp(-np.abs(z))
    s = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)
    out = Tensor(s)
    return record("sigmoid", (x,), out, lambda g: (g * s * (1 - s),))


def abs(x):
    sign = np.sign(x.data)
    out = Tensor(np.abs(x.data))
    return record("abs", (x,), out, lambda g: (g * sign,))


def softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s)

    def backward(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return record("softmax", (x,), out, backward)


def log_softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    ls = z - lse
    out = Tensor(ls)

    def backward(g):
        return (g - np.exp(ls) * g.sum(axis=axis, keepdims=True),)

    return record("log_softmax", (x,), out, backward)


def sum(x):
    out = Tensor(np.asarray(x.data.sum(), dtype=x.data.dtype))
    return record("sum", (x,), out, lambda g: (np.broadcast_to(g, x.shape).copy(),))


def mean(x):
    n = x.data.size
    if n == 0:
        raise ShapeError("mean of an empty tensor")
    out = Tensor(np.asarray(x.data.mean(), dtype=x.data.dtype))
    return record("mean", (x,), out, lambda g: (np.full(x.shape, g / n, dtype=x.data.dtype),))


def reshape(x, shape):
    out = Tensor(x.data.reshape(shape))
    return record("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x, axes):
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor(np.ascontiguousarray(x.data.transpose(axes)))
    return record("transpose", (x,), out, lambda g: (g.transpose(inv),))


def flatten(x):
    """Collapse all but the leading axis."""
    return reshape(x, (x.shape[0], -1))


def take(x, index):
    """Select rows ``x[index]`` along axis 0."""
    index = np.asarray(index, dtype=np.int64)
    out = Tensor(x.data[index])

    def backward(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, index, g)
        return (gx,)

    return record("take", (x,), out, backward)


def concat(tensors, axis=0):
    tensors = list(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, sizes, axis=axis))

    return record("concat", tuple(tensors), out, backward)


def grad_reverse(x):
    """Identity forward; the backward pass negates the gradient (factor -1)."""
    out = Tensor(x.data.copy())
    return record("grad_reverse", (x,), out, lambda g: (-g,))


def conv2d(x, w, b, stride=1, pad=0):
    """Cross-correlation of x [N, C, H, W] with w [F, C, kh, kw] plus bias b [F]."""
    if x.ndim != 4 or w.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-d input and weight, got {x.shape} and {w.shape}")
    N, C, H, W = x.shape
    F, Cw, kh, kw = w.shape
    if Cw != C:
        raise ShapeError(f"conv2d: input has {C} channels, weight expects {Cw}")
    if b.shape != (F,):
        raise ShapeError(f"conv2d: bias {b.shape} does not match {F} filters")
    if stride < 1 or pad < 0:
        raise ShapeError(f"conv2d: bad stride {stride} / pad {pad}")
    Hp, Wp = H + 2 * pad, W + 2 * pad
    if kh > Hp or kw > Wp:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} larger than padded input {Hp}x{Wp}")
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    cols = kernels.im2col(xp, kh, kw, stride)  # N, C*kh*kw, Ho*Wo
    wmat = w.data.reshape(F, -1)
    out_data = np.matmul(wmat, cols) + b.data[None, :, None]
    out = Tensor(out_data.reshape(N, F, Ho, Wo))

    def backward(g):
        g2 = g.reshape(N, F, Ho * Wo)
        gw = np.einsum("nfl,nkl->fk", g2, cols).reshape(w.shape) if _wants(w) else None
        gb = g2.sum(axis=(0, 2)) if _wants(b) else None
        gx = None
        if _wants(x):
            gcols = np.matmul(wmat.T, g2)
            gxp = kernels.col2im(gcols, (N, C, Hp, Wp), kh, kw, stride)
            gx = gxp[:, :, pad:pad + H, pad:pad + W] if pad else gxp
        return gx, gw, gb

    return record("conv2d", (x, w, b), out, backward)


def max_pool2d(x, kernel=2, stride=2):
    """Max pooling over non-padded windows; gradient goes to the first max."""
    N, C, H, W = x.shape
    Ho = (H - kernel) // stride + 1
    Wo = (W - kernel) // stride + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError(f"max_pool2d: window {kernel} larger than input {H}x{W}")
    cols = kernels.im2col(x.data.reshape(N * C, 1, H, W), kernel, kernel, stride)
    arg = cols.argmax(axis=1)  # N*C, L
    vals = np.take_along_axis(cols, arg[:, None, :], axis=1)[:, 0, :]
    out = Tensor(vals.reshape(N, C, Ho, Wo))

    def backward(g):
        gcols = np.zeros_like(cols)
        np.put_along_axis(gcols, arg[:, None, :], g.reshape(N * C, 1, -1), axis=1)
        gx = kernels.col2im(gcols, (N * C, 1, H, W), kernel, kernel, stride)
        return (gx.reshape(N, C, H, W),)

    return record("max_pool2d", (x,), out, backward)


def roi_pool_bins(boxes, height, width, out_h, out_w, stride):
    """Integer bin edges on the feature grid for each box.

    Box coordinates are divided by ``stride`` and rounded; the end edge is
    exclusive and at least one cell past the start. Each ROI is split into
    ``out_h`` x ``out_w`` bins with floor/ceil edges, clipped to the map.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    x1 = np.round(boxes[:, 0] / stride).astype(np.int64)
    y1 = np.round(boxes[:, 1] / stride).astype(np.int64)
    x2 = np.maximum(np.round(boxes[:, 2] / stride).astype(np.int64), x1 + 1)
    y2 = np.maximum(np.round(boxes[:, 3] / stride).astype(np.int64), y1 + 1)
    rh = (y2 - y1).astype(np.float64)
    rw = (x2 - x1).astype(np.float64)
    ph = np.arange(out_h, dtype=np.float64)
    pw = np.arange(out_w, dtype=np.float64)
    hs = y1[:, None] + np.floor(ph[None, :] * rh[:, None] / out_h).astype(np.int64)
    he = y1[:, None] + np.ceil((ph[None, :] + 1) * rh[:, None] / out_h).astype(np.int64)
    ws = x1[:, None] + np.floor(pw[None, :] * rw[:, None] / out_w).astype(np.int64)
    we = x1[:, None] + np.ceil((pw[None, :] + 1) * rw[:, None] / out_w).astype(np.int64)
    return (np.clip(hs, 0, height), np.clip(he, 0, height),
            np.clip(ws, 0, width), np.clip(we, 0, width))


def roi_pool(fm, boxes, out_h, out_w, stride):
    """Pool boxes (image pixels) from fm [1, C, H, W] into [R, C, out_h, out_w]."""
    if fm.ndim != 4 or fm.shape[0] != 1:
        raise ShapeError(f"roi_pool: expected a [1, C, H, W] feature map, got {fm.shape}")
    _, C, H, W = fm.shape
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    if np.any((boxes[:, 2] <= boxes[:, 0]) | (boxes[:, 3] <= boxes[:, 1])):
        raise ValueError("roi_pool: every box needs positive width and height")
    hs, he, ws, we = roi_pool_bins(boxes, H, W, out_h, out_w, stride)
    out_data, argmax = kernels.roi_pool_forward(fm.data[0], hs, he, ws, we)
    out = Tensor(out_data)

    def backward(g):
        gx = kernels.roi_pool_backward(np.ascontiguousarray(g), argmax, H, W)
        return (gx[None],)

    return record("roi_pool", (fm,), out, backward)


def _labels_like(labels, x):
    lab = np.asarray(labels, dtype=x.data.dtype)
    if lab.shape != x.shape:
        lab = np.broadcast_to(lab, x.shape)
    return lab


def _reduce(loss, reduction):
    if reduction == "none":
        return loss, np.ones_like(loss)
    if reduction == "sum":
        return np.asarray(loss.sum(), dtype=loss.dtype), np.ones_like(loss)
    if reduction == "mean":
        n = max(loss.size, 1)
        return np.asarray(loss.sum() / n, dtype=loss.dtype), np.full_like(loss, 1.0 / n)
    raise ValueError(f"unknown reduction {reduction!r}")


def sigmoid_cross_entropy(logits, labels, reduction="mean"):
    """Binary cross-entropy on logits: -[y log p + (1-y) log(1-p)], p = sigmoid(z).

    Evaluated as max(z, 0) - z*y + log(1 + exp(-|z|)) so large logits never
    produce inf.
    """
    z = logits.data
    y = _labels_like(labels, logits)
    per = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    val, scale = _reduce(per, reduction)
    out = Tensor(val)
    e = np.exp(-np.abs(z))
    p = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def backward(g):
        return ((p - y) * scale * g,)

    return record("sigmoid_cross_entropy", (logits,), out, backward)


def softmax_cross_entropy(logits, labels, reduction="mean"):
    """Multi-class cross-entropy for logits [N, K] and integer labels [N]."""
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: expected [N, K] logits, got {logits.shape}")
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != logits.shape[0]:
        raise ShapeError(f"softmax_cross_entropy: {labels.shape[0]} labels for {logits.shape[0]} rows")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    ls = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    rows = np.arange(len(labels))
    per = -ls[rows, labels]
    val, scale = _reduce(per, reduction)
    out = Tensor(val)

    def backward(g):
        gz = np.exp(ls)
        gz[rows, labels] -= 1
        return (gz * (scale * g)[:, None] if reduction == "none" else gz * scale[:, None] * g,)

    return record("softmax_cross_entropy", (logits,), out, backward)


def smooth_l1(pred, target):
    """Summed smooth-L1 (transition at |d| = 1) between pred and target."""
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=pred.data.dtype))
    if pred.shape != target.shape:
        raise ShapeError(f"smooth_l1: pred {pred.shape} vs target {target.shape}")
    d = pred.data - target.data
    ad = np.abs(d)
    small = ad < 1
    out = Tensor(np.asarray(np.where(small, 0.5 * d * d, ad - 0.5).sum(), dtype=pred.data.dtype))
    dd = np.where(small, d, np.sign(d))

    def backward(g):
        return (dd * g if _wants(pred) else None, -dd * g if _wants(target) else None)

    return record("smooth_l1", (pred, target), out, backward)
