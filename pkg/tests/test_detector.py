import math

import numpy as np
import pytest

from da_detect import autodiff as ad
from da_detect.detector import (
    Detector,
    DetectorConfig,
    TargetLabelError,
    compute_detection_loss,
    encode_deltas,
    rpn_loss,
    sample_rois,
)
from da_detect.synthdata import Sample


def test_roi_pool_single_cell_and_constant_map():
    fm = ad.Tensor(np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4))
    one = ad.roi_pool(fm, np.array([[4, 8, 8, 12]]), 1, 1, 4).data
    assert one[0, 0, 0, 0] == 9.0  # row 2, column 1
    const = ad.Tensor(np.full((1, 2, 5, 5), 3.0, dtype=np.float32))
    out = ad.roi_pool(const, np.array([[1, 2, 17, 19], [0, 0, 20, 20]]), 3, 3, 4).data
    np.testing.assert_array_equal(out, np.full((2, 2, 3, 3), 3.0))


def test_roi_pool_quadrant_maxima():
    fm = ad.Tensor(np.random.default_rng(0).permutation(16).astype(np.float32).reshape(1, 1, 4, 4))
    out = ad.roi_pool(fm, np.array([[0, 0, 16, 16]]), 2, 2, 4).data[0, 0]
    m = fm.data[0, 0]
    expected = [[m[:2, :2].max(), m[:2, 2:].max()], [m[2:, :2].max(), m[2:, 2:].max()]]
    np.testing.assert_array_equal(out, expected)


def test_roi_pool_rejects_degenerate_boxes():
    fm = ad.Tensor(np.ones((1, 1, 4, 4), dtype=np.float32))
    with pytest.raises(ValueError):
        ad.roi_pool(fm, np.array([[4, 4, 4, 8]]), 2, 2, 4)


def test_roi_pool_gradient_routes_to_argmax():
    data = np.zeros((1, 1, 4, 4), dtype=np.float32)
    data[0, 0, 1, 2] = 5.0
    fm = ad.Tensor(data, requires_grad=True)
    with ad.Tape() as tape:
        s = ad.sum(ad.roi_pool(fm, np.array([[0, 0, 16, 16]]), 1, 1, 4))
    tape.backward(s)
    expected = np.zeros_like(data)
    expected[0, 0, 1, 2] = 1.0
    np.testing.assert_array_equal(fm.grad, expected)


def _check_detections(dets, H, W, K):
    scores = [d.score for d in dets]
    assert scores == sorted(scores, reverse=True)
    for d in dets:
        assert 1 <= d.category <= K
        assert 0 <= d.score <= 1
        assert 0 <= d.box.x1 <= d.box.x2 <= W and 0 <= d.box.y1 <= d.box.y2 <= H


def test_untrained_detector_on_blank_image():
    det = Detector(seed=3)
    dets = det.detect(np.zeros((3, 64, 64), dtype=np.float32))
    _check_detections(dets, 64, 64, det.cfg.num_classes)


def test_score_floor_above_one_gives_nothing(tiny_source):
    det = Detector(seed=0)
    assert det.detect(tiny_source[0].image, score_floor=1.1) == []


def test_proposals_are_clipped_and_capped(tiny_source):
    det = Detector(seed=1)
    boxes, scores = det.proposals(tiny_source[0].image)
    assert len(boxes) <= det.cfg.post_nms_top_n
    assert np.all(boxes >= 0) and np.all(boxes <= 64)
    assert np.all(np.diff(scores) <= 0)
    more, _ = det.proposals(tiny_source[0].image, top_p=100)
    assert len(more) >= len(boxes)


def test_feature_map_shape():
    det = Detector()
    fm = det.features(np.zeros((3, 64, 64), dtype=np.float32))
    assert fm.shape == (1, 64, 16, 16)


def test_single_anchor_rpn_loss_by_hand():
    cfg = DetectorConfig()
    anchors = np.array([[0.0, 0.0, 10.0, 10.0]])
    gt = np.array([[1.0, 0.0, 11.0, 12.0]])
    z, d = 0.3, np.array([0.05, -0.2, 0.4, 1.7])
    cls, reg = rpn_loss(ad.Tensor(np.array([z])), ad.Tensor(d[None]), anchors, gt, cfg,
                        np.random.default_rng(0))
    t = encode_deltas(anchors, gt)[0]
    diff = np.abs(d - t)
    sl1 = np.where(diff < 1, 0.5 * diff ** 2, diff - 0.5).sum()
    assert cls.item() == pytest.approx(math.log1p(math.exp(-z)), abs=1e-6)
    assert reg.item() == pytest.approx(sl1, abs=1e-5)


def test_no_gt_gives_classification_only():
    det = Detector(seed=0)
    s = Sample(np.full((3, 64, 64), 0.4, np.float32), np.zeros((0, 4)), [], 0)
    st = det.forward(s.image)
    rng = np.random.default_rng(0)
    cls, reg = rpn_loss(st.objectness, st.rpn_deltas, st.anchors, s.boxes, det.cfg, rng)
    assert reg.item() == 0.0 and cls.item() > 0
    l_rpn, l_roi = compute_detection_loss(s, st, det, rng)
    assert np.isfinite(l_rpn.item()) and np.isfinite(l_roi.item())


def test_target_sample_refused(tiny_target):
    det = Detector(seed=0)
    s = tiny_target[0]
    with pytest.raises(TargetLabelError):
        compute_detection_loss(s, det.forward(s.image), det, np.random.default_rng(0))


def test_roi_sampling_caps_foreground(tiny_source):
    cfg = DetectorConfig()
    s = tiny_source[0]
    props = np.tile(s.boxes, (10, 1)).astype(np.float64)
    t = sample_rois(props, s.boxes, s.labels, cfg, np.random.default_rng(0))
    assert len(t.rois) <= cfg.roi_batch
    assert len(t.fg) <= round(cfg.roi_batch * cfg.roi_fg_fraction)
    assert np.all(t.labels[t.fg] >= 1)
    assert np.all(t.labels[len(t.fg):] == 0)


def test_detection_loss_reaches_every_detector_parameter(tiny_source):
    det = Detector(seed=0)
    s = tiny_source[1]
    with ad.Tape() as tape:
        st = det.forward(s.image)
        l_rpn, l_roi = compute_detection_loss(s, st, det, np.random.default_rng(0))
        total = l_rpn + l_roi
    tape.backward(total)
    missing = [k for k, t in det.params.items() if t.grad is None]
    assert missing == []
