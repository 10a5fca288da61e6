import numpy as np
import pytest

from da_detect import kernels
from da_detect.kernels import _pykernels as py

try:
    from da_detect.kernels import _ckernels as cy
except ImportError:  # extension not built
    cy = None

needs_ext = pytest.mark.skipif(cy is None, reason="compiled kernels unavailable")


def random_boxes(rng, n, size=50.0):
    xy = rng.uniform(0, size, (n, 2))
    wh = rng.uniform(1, size / 2, (n, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_iou_matrix_hand_values():
    a = np.array([[0, 0, 2, 2]], dtype=np.float64)
    b = np.array([[1, 1, 3, 3], [0, 0, 2, 2], [5, 5, 6, 6]], dtype=np.float64)
    np.testing.assert_allclose(py.iou_matrix(a, b), [[1 / 7, 1.0, 0.0]])


def test_iou_of_degenerate_boxes_is_zero():
    z = np.array([[1.0, 1.0, 1.0, 1.0]])
    assert py.iou_matrix(z, z)[0, 0] == 0.0


@needs_ext
def test_backends_agree_on_iou_and_nms(rng):
    for _ in range(20):
        a = random_boxes(rng, 12)
        b = random_boxes(rng, 7)
        np.testing.assert_allclose(cy.iou_matrix(a, b), py.iou_matrix(a, b), rtol=1e-12)
        order = np.argsort(-rng.random(12), kind="stable")
        for thr in (0.3, 0.5, 0.7):
            assert list(cy.nms_sorted(a, order, thr)) == list(py.nms_sorted(a, order, thr))


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_backends_agree_on_roi_pool(rng, dtype):
    fm = rng.standard_normal((5, 9, 11)).astype(dtype)
    hs = rng.integers(0, 8, (6, 4)).astype(np.int64)
    he = np.minimum(hs + rng.integers(0, 3, (6, 4)), 9).astype(np.int64)
    ws = rng.integers(0, 10, (6, 4)).astype(np.int64)
    we = np.minimum(ws + rng.integers(0, 3, (6, 4)), 11).astype(np.int64)
    out_p, arg_p = py.roi_pool_forward(fm, hs, he, ws, we)
    out_c, arg_c = cy.roi_pool_forward(fm, hs, he, ws, we)
    np.testing.assert_array_equal(out_c, out_p)
    np.testing.assert_array_equal(arg_c, arg_p)
    g = rng.standard_normal(out_p.shape).astype(dtype)
    np.testing.assert_allclose(cy.roi_pool_backward(g, arg_c, 9, 11), py.roi_pool_backward(g, arg_p, 9, 11),
                               rtol=1e-6)


@needs_ext
def test_backends_agree_on_im2col_col2im(rng):
    x = rng.standard_normal((2, 3, 7, 8)).astype(np.float32)
    for k, s in ((3, 1), (2, 2), (1, 1)):
        cols_p = py.im2col(x, k, k, s)
        np.testing.assert_array_equal(cy.im2col(x, k, k, s), cols_p)
        np.testing.assert_array_equal(cy.col2im(cols_p, x.shape, k, k, s), py.col2im(cols_p, x.shape, k, k, s))


def test_col2im_is_adjoint_of_im2col(rng):
    x = rng.standard_normal((1, 2, 6, 6))
    y = rng.standard_normal(py.im2col(x, 3, 3, 1).shape)
    lhs = np.sum(py.im2col(x, 3, 3, 1) * y)
    rhs = np.sum(x * py.col2im(y, x.shape, 3, 3, 1))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_fnv1a64_reference_vectors():
    # published FNV-1a 64-bit test vectors
    assert py.fnv1a64(b"") == 0xCBF29CE484222325
    assert py.fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert py.fnv1a64(b"foobar") == 0x85944171F73967E8


@needs_ext
def test_fnv1a64_backends_agree(rng):
    for n in (0, 1, 17, 1000):
        data = rng.integers(0, 256, n, dtype=np.uint8).tobytes()
        assert cy.fnv1a64(data) == py.fnv1a64(data)
    assert cy.fnv1a64(b"bar", cy.fnv1a64(b"foo")) == py.fnv1a64(b"foobar")
