"""Toy two-stage detector: conv backbone, anchor RPN, ROI pooling and ROI head."""

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from .boxes import AnchorConfig, Box, Detection, clip_boxes, decode_deltas, generate_anchors, nms

PIXEL_MEAN = 0.5


@dataclass(frozen=True)
class DetectorConfig:
    num_classes: int = 3
    anchors: AnchorConfig = field(default_factory=AnchorConfig)
    backbone_channels: tuple = (8, 16, 32, 64)
    rpn_channels: int = 64
    pool_size: int = 4
    fc_dim: int = 128
    pre_nms_top_n: int = 200
    rpn_nms_iou: float = 0.7
    post_nms_top_n: int = 64
    min_box_size: float = 1.0
    det_nms_iou: float = 0.3
    score_floor: float = 0.05
    rpn_batch: int = 32
    rpn_pos_fraction: float = 0.5
    rpn_pos_iou: float = 0.7
    rpn_neg_iou: float = 0.3
    roi_batch: int = 16
    roi_fg_fraction: float = 0.25
    roi_fg_iou: float = 0.5
    roi_box_weights: tuple = (10.0, 10.0, 5.0, 5.0)

    @property
    def feature_channels(self):
        return self.backbone_channels[-1]


def he_normal(rng, shape, fan_in, gain=1.0):
    std = gain * np.sqrt(2.0 / fan_in)
    return (rng.standard_normal(shape) * std).astype(np.float32)


def _conv_param(params, rng, name, cin, cout, k, std=None):
    fan_in = cin * k * k
    w = he_normal(rng, (cout, cin, k, k), fan_in) if std is None else \
        (rng.standard_normal((cout, cin, k, k)) * std).astype(np.float32)
    params[f"{name}.w"] = ad.Tensor(w, requires_grad=True, name=f"{name}.w")
    params[f"{name}.b"] = ad.Tensor(np.zeros(cout, np.float32), requires_grad=True, name=f"{name}.b")


def _fc_param(params, rng, name, din, dout, std=None):
    w = he_normal(rng, (din, dout), din) if std is None else \
        (rng.standard_normal((din, dout)) * std).astype(np.float32)
    params[f"{name}.w"] = ad.Tensor(w, requires_grad=True, name=f"{name}.w")
    params[f"{name}.b"] = ad.Tensor(np.zeros(dout, np.float32), requires_grad=True, name=f"{name}.b")


def init_detector_params(cfg, rng):
    """He-initialised hidden layers, zero biases; output layers start small."""
    params = {}
    cin = 3
    for i, cout in enumerate(cfg.backbone_channels, start=1):
        _conv_param(params, rng, f"backbone.conv{i}", cin, cout, 3)
        cin = cout
    A = cfg.anchors.num_anchors
    _conv_param(params, rng, "rpn.conv", cin, cfg.rpn_channels, 3)
    _conv_param(params, rng, "rpn.cls", cfg.rpn_channels, A, 1, std=0.01)
    _conv_param(params, rng, "rpn.bbox", cfg.rpn_channels, 4 * A, 1, std=0.01)
    pooled = cin * cfg.pool_size * cfg.pool_size
    _fc_param(params, rng, "roi.fc6", pooled, cfg.fc_dim)
    _fc_param(params, rng, "roi.fc7", cfg.fc_dim, cfg.fc_dim)
    _fc_param(params, rng, "roi.cls", cfg.fc_dim, cfg.num_classes + 1, std=0.01)
    _fc_param(params, rng, "roi.bbox", cfg.fc_dim, 4 * (cfg.num_classes + 1), std=0.001)
    return params


@dataclass
class ForwardState:
    """Detector activations for one image, shared by losses and adaptation heads."""

    image_size: tuple  # (H, W)
    features: ad.Tensor  # [1, C, Hf, Wf]
    objectness: ad.Tensor  # [Hf*Wf*A] logits
    rpn_deltas: ad.Tensor  # [Hf*Wf*A, 4]
    anchors: np.ndarray
    proposals: np.ndarray  # [P, 4] post-NMS, no gradient
    proposal_scores: np.ndarray


@dataclass
class RoiOutput:
    rois: np.ndarray
    features: ad.Tensor  # [R, fc_dim] instance-level representation
    cls_logits: ad.Tensor  # [R, K+1]
    box_deltas: ad.Tensor  # [R, 4(K+1)]


class Detector:
    """Backbone + RPN + ROI head with parameters held in a flat dict."""

    def __init__(self, cfg=None, seed=0, params=None):
        self.cfg = cfg or DetectorConfig()
        self.params = params if params is not None else init_detector_params(
            self.cfg, np.random.default_rng(seed))
        self._anchor_cache = {}

    def _p(self, name):
        return self.params[name]

    def _conv(self, x, name, pad=1):
        return ad.conv2d(x, self._p(f"{name}.w"), self._p(f"{name}.b"), 1, pad)

    def features(self, image):
        """Backbone feature map [1, C, H/4, W/4] for an image [3, H, W] in [0, 1]."""
        data = np.asarray(image.data if isinstance(image, ad.Tensor) else image)
        x = ad.Tensor((data - PIXEL_MEAN)[None].astype(np.float32))
        x = ad.relu(self._conv(x, "backbone.conv1"))
        x = ad.max_pool2d(x)
        x = ad.relu(self._conv(x, "backbone.conv2"))
        x = ad.max_pool2d(x)
        x = ad.relu(self._conv(x, "backbone.conv3"))
        return ad.relu(self._conv(x, "backbone.conv4"))

    def anchors(self, hf, wf):
        key = (hf, wf)
        if key not in self._anchor_cache:
            self._anchor_cache[key] = generate_anchors(self.cfg.anchors, hf, wf)
        return self._anchor_cache[key]

    def rpn(self, fm):
        A = self.cfg.anchors.num_anchors
        _, _, hf, wf = fm.shape
        h = ad.relu(self._conv(fm, "rpn.conv"))
        logits = self._conv(h, "rpn.cls", pad=0)  # 1, A, hf, wf
        deltas = self._conv(h, "rpn.bbox", pad=0)  # 1, 4A, hf, wf
        logits = ad.reshape(ad.transpose(ad.reshape(logits, (A, hf, wf)), (1, 2, 0)), (-1,))
        deltas = ad.transpose(ad.reshape(deltas, (A, 4, hf, wf)), (2, 3, 0, 1))
        return logits, ad.reshape(deltas, (-1, 4))

    def propose(self, objectness, rpn_deltas, anchors, image_size, pre_n=None, post_n=None):
        """Decode, clip, drop tiny boxes, keep top-N, NMS, keep top-K."""
        cfg = self.cfg
        pre_n = cfg.pre_nms_top_n if pre_n is None else pre_n
        post_n = cfg.post_nms_top_n if post_n is None else post_n
        H, W = image_size
        scores = 1.0 / (1.0 + np.exp(-objectness.data.astype(np.float64)))
        boxes = clip_boxes(decode_deltas(anchors, rpn_deltas.data.astype(np.float64)), H, W)
        ok = ((boxes[:, 2] - boxes[:, 0]) >= cfg.min_box_size) & \
             ((boxes[:, 3] - boxes[:, 1]) >= cfg.min_box_size)
        idx = np.flatnonzero(ok)
        order = idx[np.argsort(-scores[idx], kind="stable")][:pre_n]
        keep = nms(boxes[order], scores[order], cfg.rpn_nms_iou)[:post_n]
        sel = order[keep]
        return boxes[sel], scores[sel]

    def forward(self, image):
        data = np.asarray(image.data if isinstance(image, ad.Tensor) else image)
        H, W = data.shape[1:]
        fm = self.features(data)
        objectness, deltas = self.rpn(fm)
        anchors = self.anchors(fm.shape[2], fm.shape[3])
        props, scores = self.propose(objectness, deltas, anchors, (H, W))
        return ForwardState((H, W), fm, objectness, deltas, anchors, props, scores)

    def roi_head(self, fm, rois):
        cfg = self.cfg
        pooled = ad.roi_pool(fm, rois, cfg.pool_size, cfg.pool_size, cfg.anchors.feature_stride)
        x = ad.flatten(pooled)
        x = ad.relu(ad.linear(x, self._p("roi.fc6.w"), self._p("roi.fc6.b")))
        x = ad.relu(ad.linear(x, self._p("roi.fc7.w"), self._p("roi.fc7.b")))
        cls = ad.linear(x, self._p("roi.cls.w"), self._p("roi.cls.b"))
        box = ad.linear(x, self._p("roi.bbox.w"), self._p("roi.bbox.b"))
        return RoiOutput(np.asarray(rois, dtype=np.float64).reshape(-1, 4), x, cls, box)

    def detect(self, image, score_floor=None):
        """Inference path: proposals -> ROI head -> per-class NMS, sorted by score."""
        cfg = self.cfg
        floor = cfg.score_floor if score_floor is None else score_floor
        state = self.forward(image)
        return self.detections_from_state(state, floor)

    def detections_from_state(self, state, score_floor):
        cfg = self.cfg
        H, W = state.image_size
        if len(state.proposals) == 0:
            return []
        out = self.roi_head(state.features, state.proposals)
        probs = ad.softmax(out.cls_logits).data.astype(np.float64)
        deltas = out.box_deltas.data.astype(np.float64)
        found = []
        for c in range(1, cfg.num_classes + 1):
            sc = probs[:, c]
            keep = sc > score_floor
            if not np.any(keep):
                continue
            boxes = decode_deltas(state.proposals[keep], deltas[keep, 4 * c:4 * c + 4],
                                  cfg.roi_box_weights)
            boxes = clip_boxes(boxes, H, W)
            sc = sc[keep]
            valid = (boxes[:, 2] > boxes[:, 0]) & (boxes[:, 3] > boxes[:, 1])
            boxes, sc = boxes[valid], sc[valid]
            for i in nms(boxes, sc, cfg.det_nms_iou):
                found.append(Detection(Box.from_array(boxes[i]), c, float(sc[i])))
        found.sort(key=lambda d: -d.score)
        return found

    def proposals(self, image, top_p=None):
        """Post-NMS proposals (boxes, scores); ``top_p`` overrides the kept count."""
        if top_p is None:
            state = self.forward(image)
            return state.proposals, state.proposal_scores
        data = np.asarray(image.data if isinstance(image, ad.Tensor) else image)
        fm = self.features(data)
        objectness, deltas = self.rpn(fm)
        anchors = self.anchors(fm.shape[2], fm.shape[3])
        pre_n = max(self.cfg.pre_nms_top_n, top_p)
        return self.propose(objectness, deltas, anchors, data.shape[1:], pre_n=pre_n, post_n=top_p)
