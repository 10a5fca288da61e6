"""Tensor and tape for reverse-mode differentiation."""

import contextlib
import threading

import numpy as np

_local = threading.local()


class TapeError(RuntimeError):
    """Misuse of a tape (double backward, non-scalar loss, ...)."""


class ShapeError(ValueError):
    """Operand shapes are incompatible for an operation."""


def default_dtype():
    return getattr(_local, "dtype", np.float32)


@contextlib.contextmanager
def precision(dtype):
    """Temporarily change the dtype used for new tensors built from raw data."""
    prev = default_dtype()
    _local.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _local.dtype = prev


def _tape_stack():
    stack = getattr(_local, "tapes", None)
    if stack is None:
        stack = _local.tapes = []
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense float array that can take part in a recorded computation.

    ``data`` is a numpy array (float32 by default). Tensors built by ops keep
    the dtype numpy produced, so a float64 input stays float64 end to end.
    """

    __slots__ = ("data", "grad", "requires_grad", "_leaf", "name")

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(default_dtype())
        elif not isinstance(data, np.ndarray) and arr.dtype != default_dtype():
            arr = arr.astype(default_dtype())
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._leaf = True
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operator sugar; the real work lives in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.mul(self, 1.0 / float(other))

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)


class _Record:
    __slots__ = ("name", "inputs", "output", "backward")

    def __init__(self, name, inputs, output, backward):
        self.name = name
        self.inputs = inputs
        self.output = output
        self.backward = backward


class Tape:
    """Ordered log of differentiable operations.

    Use as a context manager; ops executed inside the block on tensors that
    require grad are recorded. :meth:`backward` replays the log once, in
    reverse, and fills ``.grad`` on leaf tensors.
    """

    def __init__(self):
        self.records = []
        self.consumed = False
        self.visited = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, name, inputs, output, backward):
        if self.consumed:
            raise TapeError("cannot record onto a tape that has already been run backward")
        output._leaf = False
        self.records.append(_Record(name, inputs, output, backward))

    def backward(self, loss, upstream=None):
        """Propagate from ``loss``; leaf tensors receive accumulated ``.grad``.

        ``upstream`` defaults to ones (for a scalar loss) and must match the
        loss shape otherwise. A tape can be run backward only once.
        """
        if self.consumed:
            raise TapeError("backward already ran on this tape; record a new one")
        self.consumed = True
        if upstream is None:
            if loss.size != 1:
                raise TapeError(f"backward needs a scalar loss or explicit upstream, got shape {loss.shape}")
            upstream = np.ones_like(loss.data)
        upstream = np.asarray(upstream, dtype=loss.data.dtype).reshape(loss.shape)
        grads = {id(loss): upstream}
        leaves = {}
        if loss._leaf and loss.requires_grad:
            leaves[id(loss)] = loss
        for rec in reversed(self.records):
            g = grads.pop(id(rec.output), None)
            if g is None:
                continue
            self.visited.append(rec.name)
            in_grads = rec.backward(g)
            for inp, gi in zip(rec.inputs, in_grads):
                if gi is None or not isinstance(inp, Tensor) or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gi
                else:
                    grads[key] = gi
                if inp._leaf:
                    leaves[key] = inp
        for key, t in leaves.items():
            g = grads.get(key)
            if g is None:
                continue
            g = np.asarray(g, dtype=t.data.dtype).reshape(t.shape)
            t.grad = g if t.grad is None else t.grad + g
        self.records = []


def record(name, inputs, output, backward):
    """Attach ``output`` to the active tape if any input needs gradients."""
    tape = active_tape()
    if tape is None:
        return output
    if any(isinstance(t, Tensor) and t.requires_grad for t in inputs):
        output.requires_grad = True
        tape.record(name, inputs, output, backward)
    return output
