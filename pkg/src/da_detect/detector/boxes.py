"""Box geometry: IoU, anchors, delta coding, target assignment and NMS.

Boxes are (x1, y1, x2, y2) in continuous pixel coordinates; area is
``(x2 - x1) * (y2 - y1)`` with no +1 convention. Array-valued helpers take
float64 arrays of shape [N, 4].
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels

MAX_LOG_RATIO = 4.0

POSITIVE = 1
NEGATIVE = 0
IGNORE = -1


@dataclass(frozen=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"invalid box {self}")

    @property
    def width(self):
        return self.x2 - self.x1

    @property
    def height(self):
        return self.y2 - self.y1

    @property
    def area(self):
        return self.width * self.height

    def as_array(self):
        return np.array([self.x1, self.y1, self.x2, self.y2], dtype=np.float64)

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))


@dataclass(frozen=True)
class AnchorConfig:
    base_size: float = 8.0
    scales: tuple = (1.0, 2.0, 4.0)
    aspect_ratios: tuple = (1.0,)
    feature_stride: int = 4

    def __post_init__(self):
        if self.base_size <= 0 or self.feature_stride <= 0:
            raise ValueError("anchor base size and stride must be positive")
        if not self.scales or not self.aspect_ratios:
            raise ValueError("need at least one scale and one aspect ratio")
        if any(s <= 0 for s in self.scales) or any(r <= 0 for r in self.aspect_ratios):
            raise ValueError("scales and aspect ratios must be positive")

    @property
    def num_anchors(self):
        return len(self.scales) * len(self.aspect_ratios)


@dataclass(frozen=True)
class Proposal:
    box: Box
    objectness: float
    image_index: int = 0


@dataclass(frozen=True)
class Detection:
    box: Box
    category: int
    score: float


def as_boxes(boxes):
    """Coerce a list of :class:`Box` or an array-like into a float64 [N, 4] array."""
    if isinstance(boxes, np.ndarray):
        return boxes.astype(np.float64, copy=False).reshape(-1, 4)
    rows = [b.as_array() if isinstance(b, Box) else np.asarray(b, dtype=np.float64) for b in boxes]
    if not rows:
        return np.zeros((0, 4), dtype=np.float64)
    return np.stack(rows).reshape(-1, 4)


def iou(a, b):
    """Intersection over union of two boxes; 0 when the union is empty."""
    a = a.as_array() if isinstance(a, Box) else np.asarray(a, dtype=np.float64)
    b = b.as_array() if isinstance(b, Box) else np.asarray(b, dtype=np.float64)
    return float(kernels.iou_matrix(a[None], b[None])[0, 0])


def iou_matrix(a, b):
    return kernels.iou_matrix(as_boxes(a), as_boxes(b))


def generate_anchors(cfg, height, width):
    """Anchor grid for an ``height`` x ``width`` feature map, as an [H*W*A, 4] array.

    Order: row-major over feature cells, then scales, then aspect ratios.
    """
    if height <= 0 or width <= 0:
        raise ValueError("feature map extents must be positive")
    shapes = []
    for s in cfg.scales:
        for r in cfg.aspect_ratios:
            w = cfg.base_size * s * math.sqrt(r)
            h = cfg.base_size * s / math.sqrt(r)
            shapes.append((w, h))
    shapes = np.asarray(shapes, dtype=np.float64)
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    cx = (xs.reshape(-1) + 0.5) * cfg.feature_stride
    cy = (ys.reshape(-1) + 0.5) * cfg.feature_stride
    cx = cx[:, None]
    cy = cy[:, None]
    half_w = shapes[None, :, 0] / 2
    half_h = shapes[None, :, 1] / 2
    anchors = np.stack([cx - half_w, cy - half_h, cx + half_w, cy + half_h], axis=-1)
    return anchors.reshape(-1, 4)


def encode_deltas(anchors, gt, weights=(1.0, 1.0, 1.0, 1.0)):
    """(tx, ty, tw, th) regression targets taking ``anchors`` onto ``gt``."""
    single = isinstance(anchors, Box) or np.ndim(anchors) == 1
    a = as_boxes([anchors] if isinstance(anchors, Box) else anchors)
    g = as_boxes([gt] if isinstance(gt, Box) else gt)
    aw = a[:, 2] - a[:, 0]
    ah = a[:, 3] - a[:, 1]
    if np.any(aw <= 0) or np.any(ah <= 0):
        raise ValueError("anchor width and height must be positive")
    gw = np.maximum(g[:, 2] - g[:, 0], 1e-6)
    gh = np.maximum(g[:, 3] - g[:, 1], 1e-6)
    wx, wy, ww, wh = weights
    d = np.stack([
        wx * ((g[:, 0] + 0.5 * gw) - (a[:, 0] + 0.5 * aw)) / aw,
        wy * ((g[:, 1] + 0.5 * gh) - (a[:, 1] + 0.5 * ah)) / ah,
        ww * np.log(gw / aw),
        wh * np.log(gh / ah),
    ], axis=1)
    return d[0] if single else d


def decode_deltas(anchors, deltas, weights=(1.0, 1.0, 1.0, 1.0)):
    """Inverse of :func:`encode_deltas`; log-ratios are clamped to +-4 first."""
    single = isinstance(anchors, Box) or np.ndim(anchors) == 1
    a = as_boxes([anchors] if isinstance(anchors, Box) else anchors)
    d = np.asarray(deltas, dtype=np.float64).reshape(-1, 4)
    aw = a[:, 2] - a[:, 0]
    ah = a[:, 3] - a[:, 1]
    if np.any(aw <= 0) or np.any(ah <= 0):
        raise ValueError("anchor width and height must be positive")
    wx, wy, ww, wh = weights
    dw = np.clip(d[:, 2] / ww, -MAX_LOG_RATIO, MAX_LOG_RATIO)
    dh = np.clip(d[:, 3] / wh, -MAX_LOG_RATIO, MAX_LOG_RATIO)
    cx = a[:, 0] + 0.5 * aw + d[:, 0] / wx * aw
    cy = a[:, 1] + 0.5 * ah + d[:, 1] / wy * ah
    w = aw * np.exp(dw)
    h = ah * np.exp(dh)
    out = np.stack([cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h], axis=1)
    if single:
        return Box.from_array(out[0])
    return out


def clip_boxes(boxes, height, width):
    b = as_boxes(boxes).copy()
    b[:, [0, 2]] = np.clip(b[:, [0, 2]], 0, width)
    b[:, [1, 3]] = np.clip(b[:, [1, 3]], 0, height)
    return b


@dataclass
class AnchorTargets:
    labels: np.ndarray  # per anchor: POSITIVE / NEGATIVE / IGNORE
    matched: np.ndarray  # index of the best gt per anchor (-1 without gt)
    max_iou: np.ndarray = field(repr=False)


def assign_anchor_targets(anchors, gt_boxes, pos_iou=0.7, neg_iou=0.3):
    """Label anchors positive / negative / ignore against ground truth.

    Positive: IoU >= ``pos_iou`` with some gt, or the best anchor for a gt
    (ties included). Negative: max IoU < ``neg_iou``. The rest are ignored.
    """
    if not 0 <= neg_iou <= pos_iou <= 1:
        raise ValueError("need 0 <= neg_iou <= pos_iou <= 1")
    anchors = as_boxes(anchors)
    gt = as_boxes(gt_boxes)
    n = len(anchors)
    if len(gt) == 0:
        return AnchorTargets(np.full(n, NEGATIVE, dtype=np.int64), np.full(n, -1, dtype=np.int64),
                             np.zeros(n))
    ious = kernels.iou_matrix(anchors, gt)  # n, G
    matched = ious.argmax(axis=1)
    max_iou = ious[np.arange(n), matched]
    labels = np.full(n, IGNORE, dtype=np.int64)
    labels[max_iou < neg_iou] = NEGATIVE
    labels[max_iou >= pos_iou] = POSITIVE
    gt_best = ious.max(axis=0)
    for g in range(len(gt)):
        if gt_best[g] <= 0:
            continue
        best = np.flatnonzero(ious[:, g] == gt_best[g])
        labels[best] = POSITIVE
        matched[best] = g
    return AnchorTargets(labels, matched.astype(np.int64), max_iou)


def nms(boxes, scores, iou_threshold):
    """Greedy non-maximum suppression; returns kept indices in score order.

    Boxes are visited by descending score (ties: lower index first) and any
    box overlapping a kept one by IoU > ``iou_threshold`` is dropped.
    """
    boxes = as_boxes(boxes)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(boxes) != len(scores):
        raise ValueError("boxes and scores differ in length")
    if len(boxes) == 0:
        return np.zeros(0, dtype=np.int64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    order = np.argsort(-scores, kind="stable")
    return kernels.nms_sorted(boxes, order, float(iou_threshold))
