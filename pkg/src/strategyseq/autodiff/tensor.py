"""Dense 2-D tensors with reverse-mode automatic differentiation.

The engine is deliberately small: plain numpy arrays for storage, a Wengert
list (``Tape``) recording each executed op in forward order, and per-op
closures that push adjoints back to the inputs.  Shapes are restricted to
what the sequence models need: scalars (shape ``()``), row/column vectors
and matrices, with numpy-style broadcasting on elementwise ops.

Training runs in float32; gradient verification switches the whole graph to
float64 via :func:`precision`.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np


class AutodiffError(RuntimeError):
    pass


class ShapeError(AutodiffError):
    pass


_state = threading.local()


def _default_dtype():
    return getattr(_state, "dtype", np.float32)


@contextmanager
def precision(dtype):
    """Temporarily change the dtype used for newly created tensors.

    Pass ``"float64"`` (or ``np.float64``) around a model build to run the
    whole graph in verification precision.
    """
    if isinstance(dtype, str):
        dtype = {"float32": np.float32, "float64": np.float64}[dtype]
    previous = _default_dtype()
    _state.dtype = dtype
    try:
        yield
    finally:
        _state.dtype = previous


def _active_tape():
    return getattr(_state, "tape", None)


class Tape:
    """Ordered record of executed ops for one forward/backward cycle.

    Ops register a backward closure while the tape is active (``with``
    block).  :func:`backward` replays the closures in reverse execution
    order, which is a reverse topological order of the graph.  A tape can
    be consumed exactly once.
    """

    def __init__(self):
        self._records = []
        self._spent = False

    def __enter__(self):
        if _active_tape() is not None:
            raise AutodiffError("a tape is already active; tapes do not nest")
        _state.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _state.tape = None
        return False

    def _record(self, fn):
        self._records.append(fn)

    def _replay(self):
        if self._spent:
            raise AutodiffError("backward already called on this tape; build a new graph")
        self._spent = True
        for fn in reversed(self._records):
            fn()
        self._records.clear()


class Tensor:
    """A dense array plus an optional gradient buffer.

    ``requires_grad`` marks trainable leaves; intermediate results inherit
    it from their inputs.  ``grad`` is allocated lazily on the backward
    pass and accumulates across calls until :meth:`zero_grad`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_tape")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or _default_dtype())
        self.grad = None
        self.requires_grad = requires_grad
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def T(self):
        return transpose(self)

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def accumulate_grad(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def sum(self):
        return total(self)

    def reshape(self, shape):
        return reshape(self, shape)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape, dtype=_default_dtype()), requires_grad=requires_grad)


def _lift(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=_default_dtype()))


def _make(data, inputs, backward_fn):
    """Create an op output and register its adjoint closure on the tape.

    The output keeps the dtype numpy computed (so float64 graphs stay
    float64 regardless of the ambient default).
    """
    data = np.asarray(data)
    out = Tensor(data, dtype=data.dtype)
    tape = _active_tape()
    out.requires_grad = any(t.requires_grad for t in inputs)
    if tape is not None and out.requires_grad:
        out._tape = tape

        def record():
            if out.grad is None:
                return
            backward_fn(out.grad)

        tape._record(record)
    return out


def backward(loss):
    """Run the reverse pass from a scalar loss.

    Populates ``grad`` on every ``requires_grad`` tensor that contributed
    to ``loss``.  The loss must have been produced while a tape was active,
    and that tape may only be consumed once.
    """
    if not isinstance(loss, Tensor):
        raise AutodiffError("backward expects a Tensor")
    if loss.data.shape != ():
        raise ShapeError(f"backward expects a scalar loss, got shape {loss.data.shape}")
    tape = loss._tape
    if tape is None:
        raise AutodiffError("loss was not produced on an active tape")
    loss.accumulate_grad(np.asarray(1.0, dtype=loss.data.dtype))
    tape._replay()


def _unbroadcast(grad, shape):
    """Sum a broadcasted gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise / linear algebra primitives


def add(a, b):
    a, b = _lift(a), _lift(b)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return _make(a.data + b.data, (a, b), bwd)


def sub(a, b):
    a, b = _lift(a), _lift(b)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return _make(a.data - b.data, (a, b), bwd)


def neg(a):
    def bwd(g):
        a.accumulate_grad(-g)

    return _make(-a.data, (a,), bwd)


def mul(a, b):
    a, b = _lift(a), _lift(b)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), bwd)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul shapes incompatible: {a.data.shape} x {b.data.shape}"
        )

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.data.T)
        if b.requires_grad:
            b.accumulate_grad(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), bwd)


def transpose(a):
    def bwd(g):
        a.accumulate_grad(g.T)

    return _make(a.data.T, (a,), bwd)


def reshape(a, shape):
    def bwd(g):
        a.accumulate_grad(g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), bwd)


def pow_const(a, p):
    def bwd(g):
        a.accumulate_grad(g * p * np.power(a.data, p - 1))

    return _make(np.power(a.data, p), (a,), bwd)


def relu(a):
    mask = a.data > 0

    def bwd(g):
        a.accumulate_grad(g * mask)

    return _make(np.maximum(a.data, 0), (a,), bwd)


def tanh(a):
    out_data = np.tanh(a.data)

    def bwd(g):
        a.accumulate_grad(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), bwd)


def sigmoid(a):
    # numerically symmetric form, no overflow for |x| large
    out_data = np.where(a.data >= 0,
                        1.0 / (1.0 + np.exp(-np.abs(a.data))),
                        np.exp(-np.abs(a.data)) / (1.0 + np.exp(-np.abs(a.data))))

    def bwd(g):
        a.accumulate_grad(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), bwd)


# ---------------------------------------------------------------------------
# reductions and normalizers


def total(a):
    def bwd(g):
        a.accumulate_grad(np.full_like(a.data, g))

    return _make(a.data.sum(), (a,), bwd)


def sum_axis(a, axis, keepdims=True):
    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(g, a.data.shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bwd)


def softmax_rows(a):
    """Row-wise softmax with max-subtraction; rows sum to 1."""
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        a.accumulate_grad(out_data * (g - dot))

    return _make(out_data, (a,), bwd)


def log_softmax_rows(a):
    m = a.data.max(axis=-1, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out_data = shifted - lse

    def bwd(g):
        soft = np.exp(out_data)
        a.accumulate_grad(g - soft * g.sum(axis=-1, keepdims=True))

    return _make(out_data, (a,), bwd)


def logsumexp(a, axis, keepdims=True):
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    out_data = np.log(s) + m
    soft = e / s
    if not keepdims:
        out_data = np.squeeze(out_data, axis=axis)

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate_grad(g * soft)

    return _make(out_data, (a,), bwd)


# ---------------------------------------------------------------------------
# structural ops


def concat_rows(parts):
    parts = list(parts)
    sizes = [p.data.shape[0] for p in parts]

    def bwd(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                p.accumulate_grad(g[offset:offset + size])
            offset += size

    return _make(np.concatenate([p.data for p in parts], axis=0), tuple(parts), bwd)


def concat_cols(parts):
    parts = list(parts)
    sizes = [p.data.shape[1] for p in parts]

    def bwd(g):
        offset = 0
        for p, size in zip(parts, sizes):
            if p.requires_grad:
                p.accumulate_grad(g[:, offset:offset + size])
            offset += size

    return _make(np.concatenate([p.data for p in parts], axis=1), tuple(parts), bwd)


def gather_rows(a, indices):
    indices = np.asarray(indices, dtype=np.intp)

    def bwd(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, indices, g)
        a.accumulate_grad(acc)

    return _make(a.data[indices], (a,), bwd)


def interleave_rows(a, idx_a, b, idx_b):
    """Scatter the rows of two blocks back to their original positions.

    ``idx_a``/``idx_b`` must be disjoint and jointly cover ``0..T-1``.
    """
    idx_a = np.asarray(idx_a, dtype=np.intp)
    idx_b = np.asarray(idx_b, dtype=np.intp)
    t = len(idx_a) + len(idx_b)
    merged = set(idx_a.tolist()) | set(idx_b.tolist())
    if len(idx_a) + len(idx_b) != len(merged) or merged != set(range(t)):
        raise ShapeError("row indices must be disjoint and cover the sequence")
    out_data = np.empty((t, a.data.shape[1]), dtype=a.data.dtype)
    out_data[idx_a] = a.data
    out_data[idx_b] = b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g[idx_a])
        if b.requires_grad:
            b.accumulate_grad(g[idx_b])

    return _make(out_data, (a, b), bwd)


def slice_cols(a, start, stop):
    def bwd(g):
        acc = np.zeros_like(a.data)
        acc[:, start:stop] = g
        a.accumulate_grad(acc)

    return _make(a.data[:, start:stop], (a,), bwd)


def pick(a, i, j):
    """Extract element (i, j) as a scalar tensor."""

    def bwd(g):
        acc = np.zeros_like(a.data)
        acc[i, j] = g
        a.accumulate_grad(acc)

    return _make(a.data[i, j], (a,), bwd)


def dropout(a, rate, rng, training):
    """Inverted dropout; identity when not training or rate == 0."""
    if not training or rate <= 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.random(a.data.shape) < keep).astype(a.data.dtype) / keep

    def bwd(g):
        a.accumulate_grad(g * mask)

    return _make(a.data * mask, (a,), bwd)
