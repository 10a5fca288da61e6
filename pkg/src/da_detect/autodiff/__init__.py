"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from . import ops
from .gradcheck import finite_diff_check, numeric_gradient, tape_gradient
from .ops import (
    abs,
    add,
    concat,
    conv2d,
    flatten,
    grad_reverse,
    linear,
    log_softmax,
    matmul,
    max_pool2d,
    mean,
    mul,
    relu,
    reshape,
    roi_pool,
    sigmoid,
    sigmoid_cross_entropy,
    smooth_l1,
    softmax,
    softmax_cross_entropy,
    sub,
    sum,
    take,
    transpose,
)
from .tensor import ShapeError, Tape, TapeError, Tensor, active_tape, default_dtype, precision

__all__ = [
    "ShapeError",
    "Tape",
    "TapeError",
    "Tensor",
    "abs",
    "active_tape",
    "add",
    "concat",
    "conv2d",
    "default_dtype",
    "finite_diff_check",
    "flatten",
    "grad_reverse",
    "linear",
    "log_softmax",
    "matmul",
    "max_pool2d",
    "mean",
    "mul",
    "numeric_gradient",
    "ops",
    "precision",
    "relu",
    "reshape",
    "roi_pool",
    "sigmoid",
    "sigmoid_cross_entropy",
    "smooth_l1",
    "softmax",
    "softmax_cross_entropy",
    "sub",
    "sum",
    "tape_gradient",
    "transpose",
]
