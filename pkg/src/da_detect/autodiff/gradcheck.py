import numpy as np

from .tensor import Tape, Tensor, precision


def numeric_gradient(f, x, eps=1e-5):
    """Central-difference gradient of scalar ``f`` at ``x``, evaluated in float64."""
    base = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)
    with precision(np.float64):
        for i in range(base.size):
            xp = base.copy()
            xm = base.copy()
            xp.reshape(-1)[i] += eps
            xm.reshape(-1)[i] -= eps
            fp = float(np.asarray(f(Tensor(xp)).data).reshape(-1)[0])
            fm = float(np.asarray(f(Tensor(xm)).data).reshape(-1)[0])
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"non-finite function value near coordinate {i}")
            flat[i] = (fp - fm) / (2 * eps)
    return grad


def tape_gradient(f, x):
    """Gradient of scalar ``f`` at ``x`` from the tape, at the tensor's own dtype."""
    data = np.array(x.data if isinstance(x, Tensor) else x, copy=True)
    if data.dtype not in (np.float32, np.float64):
        data = data.astype(np.float32)
    xt = Tensor(data, requires_grad=True)
    with Tape() as tape:
        y = f(xt)
    if y.size != 1:
        raise ValueError(f"finite_diff_check needs a scalar function, got shape {y.shape}")
    if not np.all(np.isfinite(y.data)):
        raise FloatingPointError("non-finite function value at the base point")
    tape.backward(y)
    if xt.grad is None:
        return np.zeros(data.shape, dtype=np.float64)
    return xt.grad.astype(np.float64)


def finite_diff_check(f, x, eps=1e-5):
    """Max relative error between the tape gradient and central differences.

    The tape gradient is taken at the input's dtype (float32 for normal
    tensors). The finite differences are evaluated in float64 so that the
    reference is not dominated by float32 rounding. Relative error per
    coordinate uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    if not 0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    analytic = tape_gradient(f, x)
    numeric = numeric_gradient(f, x, eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))
