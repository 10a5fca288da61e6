"""Detection metrics: AP at an IoU threshold, mAP, proposal recall quality, error taxonomy."""

from dataclasses import dataclass, field

import numpy as np

from .. import kernels


def _as_boxes(b):
    return np.asarray(b, dtype=np.float64).reshape(-1, 4)


def match_detections(detections, gt_boxes, iou_thresh=0.5):
    """Greedy score-order matching; returns ``(tp, order)``.

    ``detections`` is a sequence of ``(image_index, score, box)``;
    ``gt_boxes`` maps (or indexes) image -> [G, 4] boxes of one class.
    Detections are visited by descending score, ties in input order; each
    one takes the unmatched gt with the highest IoU if that IoU >= thresh.
    ``tp`` flags true positives in input order; ``order`` is the visiting order.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i][1])
    used = {}
    tp = np.zeros(len(detections), dtype=bool)
    for i in order:
        img, _, box = detections[i]
        gt = _as_boxes(gt_boxes[img]) if _has(gt_boxes, img) else np.zeros((0, 4))
        if len(gt) == 0:
            continue
        ious = kernels.iou_matrix(_as_boxes(box), gt)[0]
        taken = used.setdefault(img, np.zeros(len(gt), dtype=bool))
        ious = np.where(taken, -1.0, ious)
        j = int(np.argmax(ious))
        if ious[j] >= iou_thresh:
            taken[j] = True
            tp[i] = True
    return tp, order


def _has(container, key):
    if isinstance(container, dict):
        return key in container
    return 0 <= key < len(container)


def _num_gt(gt_boxes):
    vals = gt_boxes.values() if isinstance(gt_boxes, dict) else gt_boxes
    return sum(len(_as_boxes(g)) for g in vals)


def average_precision(detections, gt_boxes, iou_thresh=0.5):
    """Area under the all-points interpolated precision/recall curve.

    Returns ``nan`` when there is no ground truth (the class is then left out
    of mAP) and 0.0 when there is ground truth but no detection.
    """
    n_gt = _num_gt(gt_boxes)
    if n_gt == 0:
        return float("nan")
    if len(detections) == 0:
        return 0.0
    tp, order = match_detections(detections, gt_boxes, iou_thresh)
    tp = tp[order].astype(np.float64)
    ctp = np.cumsum(tp)
    recall = ctp / n_gt
    precision = ctp / np.arange(1, len(tp) + 1)
    # precision envelope, then sum over recall steps
    env = np.maximum.accumulate(precision[::-1])[::-1]
    r_prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - r_prev) * env))


def mean_average_precision(per_class):
    vals = [v for v in per_class.values() if not np.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")


@dataclass
class EvalReport:
    per_class: dict  # class id -> AP (nan when the class has no gt)
    mAP: float
    num_detections: int
    dataset_digest: str = ""
    checkpoint_digest: str = ""

    def to_dict(self):
        return {
            "per_class_ap": {str(k): (None if np.isnan(v) else v) for k, v in self.per_class.items()},
            "mAP": None if np.isnan(self.mAP) else self.mAP,
            "num_detections": self.num_detections,
            "dataset_digest": self.dataset_digest,
            "checkpoint_digest": self.checkpoint_digest,
        }


def collect_detections(detector, dataset, score_floor=None):
    """Run inference on every sample; returns ``[(image_index, Detection)]``."""
    out = []
    for i, s in enumerate(dataset):
        for d in detector.detect(s.image, score_floor=score_floor):
            out.append((i, d))
    return out


def evaluate_detections(found, dataset, num_classes, iou_thresh=0.5):
    per_class = {}
    for c in range(1, num_classes + 1):
        dets = [(i, d.score, d.box.as_array()) for i, d in found if d.category == c]
        gts = [s.boxes[s.labels == c] for s in dataset]
        per_class[c] = average_precision(dets, gts, iou_thresh)
    return per_class


def evaluate_detector(detector, dataset, iou_thresh=0.5, score_floor=None, checkpoint_digest=""):
    found = collect_detections(detector, dataset, score_floor)
    per_class = evaluate_detections(found, dataset, detector.cfg.num_classes, iou_thresh)
    digest = getattr(dataset, "digest_hex", "")
    return EvalReport(per_class, mean_average_precision(per_class), len(found), digest, checkpoint_digest)


def proposal_mean_best_overlap(proposals, gt_boxes):
    """Mean over every gt box of its best IoU with its own image's proposals.

    ``proposals`` and ``gt_boxes`` are parallel per-image sequences of [N, 4]
    arrays. A gt box in an image without proposals scores 0. Returns nan if
    there are no gt boxes at all.
    """
    best = []
    for props, gt in zip(proposals, gt_boxes):
        gt = _as_boxes(gt)
        if len(gt) == 0:
            continue
        props = _as_boxes(props)
        if len(props) == 0:
            best.extend([0.0] * len(gt))
            continue
        best.extend(kernels.iou_matrix(gt, props).max(axis=1).tolist())
    return float(np.mean(best)) if best else float("nan")


def detector_mean_best_overlap(detector, dataset, top_p=64):
    props = [detector.proposals(s.image, top_p=top_p)[0] for s in dataset]
    return proposal_mean_best_overlap(props, [s.boxes for s in dataset])


CORRECT = "correct"
MISLOCALIZED = "mislocalized"
BACKGROUND = "background"


@dataclass
class ErrorTaxonomy:
    counts: dict = field(default_factory=lambda: {CORRECT: 0, MISLOCALIZED: 0, BACKGROUND: 0})

    @property
    def total(self):
        return sum(self.counts.values())

    def fractions(self):
        n = self.total
        return {k: (v / n if n else 0.0) for k, v in self.counts.items()}


def error_bucket(iou):
    """IoU > 0.5 correct; 0.3 <= IoU <= 0.5 mislocalized (both ends closed); else background."""
    if iou > 0.5:
        return CORRECT
    if iou >= 0.3:
        return MISLOCALIZED
    return BACKGROUND


def categorize_detections(detections, gts, top_r=500):
    """Bucket the ``top_r`` highest-scoring detections by overlap with same-class gt.

    ``detections`` is ``[(image_index, Detection)]``; ``gts`` is a per-image
    sequence of samples (anything with ``boxes`` and ``labels``).
    """
    ranked = sorted(range(len(detections)), key=lambda i: -detections[i][1].score)[:top_r]
    tax = ErrorTaxonomy()
    for i in ranked:
        img, d = detections[i]
        s = gts[img]
        gt = _as_boxes(s.boxes)[np.asarray(s.labels) == d.category]
        iou = float(kernels.iou_matrix(_as_boxes(d.box.as_array()), gt).max()) if len(gt) else 0.0
        tax.counts[error_bucket(iou)] += 1
    return tax
