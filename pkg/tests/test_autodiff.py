import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import gradcases
from da_detect import autodiff as ad


@pytest.mark.parametrize("name", sorted(gradcases.CASES))
def test_gradient_matches_finite_differences(name):
    assert gradcases.worst_error(name, n=5, seed=7) < gradcases.TOLERANCE


def test_gradient_reversal_identity():
    assert gradcases.grl_identity_gap() < 1e-4


def test_backward_runs_once():
    x = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.Tape() as tape:
        y = ad.sum(ad.mul(x, x))
    tape.backward(y)
    with pytest.raises(ad.TapeError):
        tape.backward(y)


def test_backward_visits_records_in_reverse_order():
    x = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.Tape() as tape:
        y = ad.relu(x)
        z = ad.sigmoid(y)
        s = ad.sum(z)
    tape.backward(s)
    assert tape.visited == ["sum", "sigmoid", "relu"]


def test_non_scalar_loss_needs_upstream():
    x = ad.Tensor(np.ones(3), requires_grad=True)
    with ad.Tape() as tape:
        y = ad.mul(x, 2.0)
    with pytest.raises(ad.TapeError):
        tape.backward(y)


def test_leaf_gradients_accumulate_over_uses():
    x = ad.Tensor(np.array([2.0, 3.0]), requires_grad=True)
    with ad.Tape() as tape:
        y = ad.sum(ad.add(ad.mul(x, x), x))
    tape.backward(y)
    np.testing.assert_allclose(x.grad, 2 * x.data + 1)


def test_ops_outside_a_tape_record_nothing():
    x = ad.Tensor(np.ones(2), requires_grad=True)
    y = ad.mul(x, 3.0)
    assert ad.active_tape() is None
    np.testing.assert_array_equal(y.data, [3.0, 3.0])


def test_only_scalar_broadcasting():
    with pytest.raises(ad.ShapeError):
        ad.add(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones(3)))
    np.testing.assert_array_equal(ad.add(ad.Tensor(np.ones((2, 2))), 1.0).data, np.full((2, 2), 2.0))


def test_default_dtype_and_precision_context():
    assert ad.Tensor([1.0, 2.0]).dtype == np.float32
    with ad.precision(np.float64):
        assert ad.Tensor([1.0]).dtype == np.float64
    assert ad.default_dtype() == np.float32


def test_grad_reverse_is_identity_forward_and_negates_backward():
    x = ad.Tensor(np.array([1.0, -2.0, 3.0]), requires_grad=True)
    with ad.Tape() as tape:
        y = ad.grad_reverse(x)
        s = ad.sum(ad.mul(y, 2.0))
    np.testing.assert_array_equal(y.data, x.data)
    tape.backward(s)
    np.testing.assert_array_equal(x.grad, [-2.0, -2.0, -2.0])


def test_relu_gradient_at_zero_is_zero():
    x = ad.Tensor(np.zeros(2), requires_grad=True)
    with ad.Tape() as tape:
        s = ad.sum(ad.relu(x))
    tape.backward(s)
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


def test_sigmoid_cross_entropy_is_finite_for_huge_logits():
    z = ad.Tensor(np.array([1000.0, -1000.0]))
    v = ad.sigmoid_cross_entropy(z, [0.0, 1.0], reduction="sum").item()
    assert v == pytest.approx(2000.0)


def test_sigmoid_cross_entropy_hand_values():
    z = ad.Tensor(np.zeros(2))
    assert ad.sigmoid_cross_entropy(z, [0.0, 1.0]).item() == pytest.approx(np.log(2), abs=1e-6)
    assert ad.sigmoid_cross_entropy(z, [0.0, 1.0], reduction="sum").item() == pytest.approx(2 * np.log(2), abs=1e-6)


def test_conv2d_matches_direct_loop(rng):
    x = rng.standard_normal((1, 2, 5, 6))
    w = rng.standard_normal((3, 2, 3, 3))
    b = rng.standard_normal(3)
    with ad.precision(np.float64):
        out = ad.conv2d(ad.Tensor(x), ad.Tensor(w), ad.Tensor(b), 1, 1).data
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    ref = np.zeros((1, 3, 5, 6))
    for o in range(3):
        for i in range(5):
            for j in range(6):
                ref[0, o, i, j] = np.sum(xp[0, :, i:i + 3, j:j + 3] * w[o]) + b[o]
    np.testing.assert_allclose(out, ref, rtol=1e-10)


def test_max_pool_matches_reshape_max(rng):
    x = rng.standard_normal((1, 3, 6, 8))
    out = ad.max_pool2d(ad.Tensor(x)).data
    np.testing.assert_array_equal(out, x.reshape(1, 3, 3, 2, 4, 2).max(axis=(3, 5)))


def test_roi_pool_whole_map_bins():
    fm = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
    out = ad.roi_pool(ad.Tensor(fm), np.array([[0, 0, 16, 16]]), 2, 2, 4).data
    np.testing.assert_array_equal(out[0, 0], [[5, 7], [13, 15]])


def test_finite_diff_check_rejects_bad_eps():
    with pytest.raises(ValueError):
        ad.finite_diff_check(lambda t: ad.sum(t), np.ones(2), eps=0.1)


def test_finite_diff_check_flags_a_disagreement():
    # at the relu kink the tape says 0 while central differences say 0.5
    err = ad.finite_diff_check(lambda t: ad.sum(ad.relu(t)), np.zeros(3, dtype=np.float32), eps=1e-3)
    assert err > 0.1


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 8), elements=st.floats(-30, 30)))
def test_softmax_rows_are_distributions(x):
    p = ad.softmax(ad.Tensor(x[None])).data
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(1, 10), elements=st.floats(-50, 50)))
def test_sigmoid_bounded_and_symmetric(x):
    s = ad.sigmoid(ad.Tensor(x)).data
    assert np.all((s >= 0) & (s <= 1))
    np.testing.assert_allclose(s + ad.sigmoid(ad.Tensor(-x)).data, 1.0, atol=1e-12)
