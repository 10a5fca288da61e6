"""Toy Faster R-CNN style detector."""

from .boxes import (
    IGNORE,
    NEGATIVE,
    POSITIVE,
    AnchorConfig,
    AnchorTargets,
    Box,
    Detection,
    Proposal,
    as_boxes,
    assign_anchor_targets,
    clip_boxes,
    decode_deltas,
    encode_deltas,
    generate_anchors,
    iou,
    iou_matrix,
    nms,
)
from .losses import (
    SOURCE,
    TARGET,
    DetectionLoss,
    RoiTargets,
    TargetLabelError,
    compute_detection_loss,
    roi_loss,
    rpn_loss,
    sample_rois,
)
from .model import Detector, DetectorConfig, ForwardState, RoiOutput

__all__ = [
    "IGNORE",
    "NEGATIVE",
    "POSITIVE",
    "SOURCE",
    "TARGET",
    "AnchorConfig",
    "AnchorTargets",
    "Box",
    "Detection",
    "DetectionLoss",
    "Detector",
    "DetectorConfig",
    "ForwardState",
    "Proposal",
    "RoiOutput",
    "RoiTargets",
    "TargetLabelError",
    "as_boxes",
    "assign_anchor_targets",
    "clip_boxes",
    "compute_detection_loss",
    "decode_deltas",
    "encode_deltas",
    "generate_anchors",
    "iou",
    "iou_matrix",
    "nms",
    "roi_loss",
    "rpn_loss",
    "sample_rois",
]
