"""Detection loss: RPN objectness + box regression, ROI classification + regression."""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from .. import kernels
from ..errors import TargetLabelError
from .boxes import POSITIVE, NEGATIVE, as_boxes, assign_anchor_targets, encode_deltas

SOURCE = 0
TARGET = 1


def _zero(like):
    return ad.Tensor(np.zeros((), dtype=like.data.dtype))


def sample_anchors(labels, batch, pos_fraction, rng):
    """Indices of sampled positive and negative anchors."""
    pos = np.flatnonzero(labels == POSITIVE)
    neg = np.flatnonzero(labels == NEGATIVE)
    n_pos = min(len(pos), int(batch * pos_fraction))
    pos = rng.permutation(pos)[:n_pos]
    neg = rng.permutation(neg)[:min(len(neg), batch - n_pos)]
    return pos, neg


def rpn_loss(objectness, rpn_deltas, anchors, gt_boxes, cfg, rng):
    """(classification, regression) RPN terms.

    Binary cross-entropy is averaged over the sampled anchors; smooth-L1 on
    positive anchors is divided by the same sample count.
    """
    gt = as_boxes(gt_boxes)
    targets = assign_anchor_targets(anchors, gt, cfg.rpn_pos_iou, cfg.rpn_neg_iou)
    pos, neg = sample_anchors(targets.labels, cfg.rpn_batch, cfg.rpn_pos_fraction, rng)
    idx = np.concatenate([pos, neg])
    if len(idx) == 0:
        return _zero(objectness), _zero(objectness)
    lab = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    cls = ad.sigmoid_cross_entropy(ad.take(objectness, idx), lab, reduction="mean")
    if len(pos) == 0:
        return cls, _zero(objectness)
    tgt = encode_deltas(anchors[pos], gt[targets.matched[pos]])
    reg = ad.smooth_l1(ad.take(rpn_deltas, pos), tgt.astype(rpn_deltas.data.dtype))
    return cls, reg * (1.0 / len(idx))


@dataclass
class RoiTargets:
    rois: np.ndarray
    labels: np.ndarray  # 0 = background
    fg: np.ndarray  # indices into rois with label > 0
    deltas: np.ndarray  # regression targets for fg rois


def sample_rois(proposals, gt_boxes, gt_labels, cfg, rng):
    """Draw the training ROIs from proposals plus ground truth boxes.

    IoU >= ``roi_fg_iou`` takes the matched class, anything lower is
    background. Foreground is capped at ``roi_fg_fraction`` of the batch.
    """
    gt = as_boxes(gt_boxes)
    gl = np.asarray(gt_labels, dtype=np.int64)
    cand = np.concatenate([as_boxes(proposals), gt], axis=0)
    if len(gt):
        ious = kernels.iou_matrix(cand, gt)
        best = ious.argmax(axis=1)
        best_iou = ious[np.arange(len(cand)), best]
    else:
        best = np.zeros(len(cand), dtype=np.int64)
        best_iou = np.zeros(len(cand))
    fg = np.flatnonzero(best_iou >= cfg.roi_fg_iou)
    bg = np.flatnonzero(best_iou < cfg.roi_fg_iou)
    n_fg = min(len(fg), int(round(cfg.roi_batch * cfg.roi_fg_fraction)))
    fg = rng.permutation(fg)[:n_fg]
    bg = rng.permutation(bg)[:min(len(bg), cfg.roi_batch - n_fg)]
    keep = np.concatenate([fg, bg])
    rois = cand[keep]
    labels = np.zeros(len(keep), dtype=np.int64)
    labels[:n_fg] = gl[best[fg]] if n_fg else labels[:0]
    deltas = encode_deltas(rois[:n_fg], gt[best[fg]], cfg.roi_box_weights) if n_fg else np.zeros((0, 4))
    return RoiTargets(rois, labels, np.arange(n_fg), deltas)


def roi_loss(roi_out, targets, num_classes):
    """(K+1)-way cross-entropy plus class-specific smooth-L1 over fg ROIs."""
    n = len(targets.labels)
    cls = ad.softmax_cross_entropy(roi_out.cls_logits, targets.labels, reduction="mean")
    if len(targets.fg) == 0:
        return cls, _zero(cls)
    width = 4 * (num_classes + 1)
    cols = 4 * targets.labels[targets.fg][:, None] + np.arange(4)[None, :]
    flat_idx = (targets.fg[:, None] * width + cols).reshape(-1)
    pred = ad.reshape(ad.take(ad.reshape(roi_out.box_deltas, (-1,)), flat_idx), (-1, 4))
    reg = ad.smooth_l1(pred, targets.deltas.astype(pred.data.dtype))
    return cls, reg * (1.0 / n)


@dataclass
class DetectionLoss:
    l_rpn: ad.Tensor
    l_roi: ad.Tensor
    roi_out: object  # RoiOutput for the sampled training ROIs

    def __iter__(self):
        return iter((self.l_rpn, self.l_roi))


def compute_detection_loss(sample, state, detector, rng):
    """Detection loss ``l_rpn + l_roi`` for one labelled source-domain image.

    Raises :class:`TargetLabelError` for target-domain samples: their labels
    exist for evaluation only.
    """
    if getattr(sample, "domain", SOURCE) != SOURCE:
        raise TargetLabelError("detection loss requested for a target-domain sample")
    cfg = detector.cfg
    gt = as_boxes(sample.boxes)
    gl = np.asarray(sample.labels, dtype=np.int64)
    cls, reg = rpn_loss(state.objectness, state.rpn_deltas, state.anchors, gt, cfg, rng)
    l_rpn = cls + reg
    targets = sample_rois(state.proposals, gt, gl, cfg, rng)
    roi_out = detector.roi_head(state.features, targets.rois)
    rcls, rreg = roi_loss(roi_out, targets, cfg.num_classes)
    return DetectionLoss(l_rpn, rcls + rreg, roi_out)
