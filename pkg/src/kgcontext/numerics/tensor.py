"""Dense float64 tensors with reverse-mode gradients.

Small numpy-backed tape: each op builds a child Tensor holding a backward
closure, and Tensor.backward() walks the graph once in reverse topological
order, accumulating gradients additively. Everything is float64 so
finite-difference checks can be tight.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not conform; message names both shapes."""


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


def _as_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by op '{op}'")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array plus an optional gradient slot.

    requires_grad marks leaves (parameters); interior nodes inherit it from
    their inputs so backward() knows where to stop.
    """

    __slots__ = ("data", "requires_grad", "grad", "_backward", "_prev", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._backward = None
        self._prev: tuple[Tensor, ...] = ()
        self._op = "leaf"

    # -- graph plumbing ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def _accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse-mode sweep from a scalar output.

        The graph is walked iteratively (no recursion limit issues) and each
        recorded op's backward closure runs exactly once, in reverse
        topological order. Child order is the op's input order, so the
        traversal — and therefore float accumulation order — is
        deterministic.
        """
        if self.data.size != 1:
            raise ShapeError(
                f"backward() needs a scalar output, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for child in reversed(node._prev):
                if id(child) not in visited:
                    stack.append((child, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    # -- operator sugar ---------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def item(self) -> float:
        return float(self.data.reshape(()))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], op: str) -> Tensor:
    _check_finite(data, op)
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    out._prev = tuple(parents)
    out._op = op
    return out


# -- elementwise arithmetic ----------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _wrap(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.shape} and {b.shape} do not broadcast")
    out = _make(data, (a, b), "add")

    def _bw():
        if a.requires_grad or a._prev:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad or b._prev:
            b._accumulate(_unbroadcast(out.grad, b.data.shape))

    out._backward = _bw
    return out


def sub(a: Tensor, b) -> Tensor:
    b = _wrap(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError(f"sub: shapes {a.shape} and {b.shape} do not broadcast")
    out = _make(data, (a, b), "sub")

    def _bw():
        if a.requires_grad or a._prev:
            a._accumulate(_unbroadcast(out.grad, a.data.shape))
        if b.requires_grad or b._prev:
            b._accumulate(_unbroadcast(-out.grad, b.data.shape))

    out._backward = _bw
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} do not broadcast")
    out = _make(data, (a, b), "mul")

    def _bw():
        if a.requires_grad or a._prev:
            a._accumulate(_unbroadcast(out.grad * b.data, a.data.shape))
        if b.requires_grad or b._prev:
            b._accumulate(_unbroadcast(out.grad * a.data, b.data.shape))

    out._backward = _bw
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product with numpy stacking semantics (2-D and batched)."""
    b = _wrap(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul: operands must be >= 2-D, got {a.shape} and {b.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    data = a.data @ b.data
    out = _make(data, (a, b), "matmul")

    def _bw():
        if a.requires_grad or a._prev:
            ga = out.grad @ np.swapaxes(b.data, -1, -2)
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad or b._prev:
            gb = np.swapaxes(a.data, -1, -2) @ out.grad
            b._accumulate(_unbroadcast(gb, b.data.shape))

    out._backward = _bw
    return out


def _unary(a: Tensor, fn, dfn, op: str) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        data = fn(a.data)
    out = _make(data, (a,), op)

    def _bw():
        if a.requires_grad or a._prev:
            a._accumulate(dfn(a.data, out.data) * out.grad)

    out._backward = _bw
    return out


def tanh(a: Tensor) -> Tensor:
    return _unary(a, np.tanh, lambda x, y: 1.0 - y * y, "tanh")


def sigmoid(a: Tensor) -> Tensor:
    def fwd(x):
        return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    return _unary(a, fwd, lambda x, y: y * (1.0 - y), "sigmoid")


def relu(a: Tensor) -> Tensor:
    return _unary(a, lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(np.float64), "relu")


def exp(a: Tensor) -> Tensor:
    return _unary(a, np.exp, lambda x, y: y, "exp")


def log(a: Tensor) -> Tensor:
    return _unary(a, np.log, lambda x, y: 1.0 / x, "log")


def sqrt(a: Tensor) -> Tensor:
    return _unary(a, np.sqrt, lambda x, y: 0.5 / np.maximum(y, 1e-300), "sqrt")


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)
    out = _make(data, (a,), "sum")

    def _bw():
        if a.requires_grad or a._prev:
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape).copy())

    out._backward = _bw
    return out


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    data = a.data.mean(axis=axis, keepdims=keepdims)
    out = _make(data, (a,), "mean")

    def _bw():
        if a.requires_grad or a._prev:
            g = out.grad
            if not keepdims and axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.data.shape) / count)

    out._backward = _bw
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: needs at least one tensor")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = _make(data, tuple(tensors), "concat")
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _bw():
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad or t._prev:
                idx = [slice(None)] * out.grad.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(out.grad[tuple(idx)])

    out._backward = _bw
    return out


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)
    out = _make(data, (a,), "reshape")

    def _bw():
        if a.requires_grad or a._prev:
            a._accumulate(out.grad.reshape(a.data.shape))

    out._backward = _bw
    return out


def transpose(a: Tensor, axes) -> Tensor:
    data = a.data.transpose(axes)
    out = _make(data, (a,), "transpose")
    inverse = np.argsort(axes)

    def _bw():
        if a.requires_grad or a._prev:
            a._accumulate(out.grad.transpose(inverse))

    out._backward = _bw
    return out


# -- softmax family ---------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Stable softmax along `axis` (max-subtraction overflow guard)."""
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)
    out = _make(data, (a,), "softmax")

    def _bw():
        if a.requires_grad or a._prev:
            g = out.grad
            dot = (out.data * g).sum(axis=axis, keepdims=True)
            a._accumulate(out.data * (g - dot))

    out._backward = _bw
    return out


def masked_softmax(a: Tensor, mask: np.ndarray, axis: int = -1) -> Tensor:
    """Softmax over positions where `mask` is True.

    Masked-out positions get exactly zero weight. Rows with no valid
    position yield all-zero rows rather than NaN; their gradient is zero.
    `mask` is a constant (no gradient flows into it).
    """
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.data.shape)
    neg = np.where(mask, a.data, -np.inf)
    row_max = neg.max(axis=axis, keepdims=True)
    any_valid = mask.any(axis=axis, keepdims=True)
    row_max = np.where(any_valid, row_max, 0.0)
    e = np.exp(np.where(mask, neg - row_max, -np.inf))
    e = np.where(mask, e, 0.0)
    denom = e.sum(axis=axis, keepdims=True)
    data = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
    out = _make(data, (a,), "masked_softmax")

    def _bw():
        if a.requires_grad or a._prev:
            g = out.grad
            dot = (out.data * g).sum(axis=axis, keepdims=True)
            a._accumulate(out.data * (g - dot))

    out._backward = _bw
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    out = _make(data, (a,), "log_softmax")

    def _bw():
        if a.requires_grad or a._prev:
            g = out.grad
            soft = np.exp(out.data)
            a._accumulate(g - soft * g.sum(axis=axis, keepdims=True))

    out._backward = _bw
    return out


# -- index / gather ops -------------------------------------------------------


def gather_rows(table: Tensor, idx: np.ndarray) -> Tensor:
    """Select rows of a 2-D table: out[i] = table[idx[i]]."""
    idx = np.asarray(idx, dtype=np.int64)
    if table.data.ndim != 2:
        raise ShapeError(f"gather_rows: table must be 2-D, got {table.shape}")
    data = table.data[idx]
    out = _make(data, (table,), "gather_rows")

    def _bw():
        if table.requires_grad or table._prev:
            g = np.zeros_like(table.data)
            np.add.at(g, idx, out.grad)
            table._accumulate(g)

    out._backward = _bw
    return out


def pick(a: Tensor, idx: np.ndarray) -> Tensor:
    """out[i] = a[i, idx[i]] for a 2-D input."""
    idx = np.asarray(idx, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeError(f"pick: input must be 2-D, got {a.shape}")
    rows = np.arange(a.data.shape[0])
    data = a.data[rows, idx]
    out = _make(data, (a,), "pick")

    def _bw():
        if a.requires_grad or a._prev:
            g = np.zeros_like(a.data)
            np.add.at(g, (rows, idx), out.grad)
            a._accumulate(g)

    out._backward = _bw
    return out


# -- segment ops (ragged neighborhoods) ---------------------------------------


def segment_softmax(logits: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Softmax of a flat logit vector independently within each segment.

    Entries of equal logits inside a segment get exactly equal weight.
    Segments with no entries simply contribute nothing.
    """
    seg = np.asarray(segments, dtype=np.int64)
    if logits.data.ndim != 1 or seg.shape != logits.data.shape:
        raise ShapeError(
            f"segment_softmax: logits {logits.shape} and segments {seg.shape} must be equal-length 1-D"
        )
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, seg, logits.data)
    e = np.exp(logits.data - seg_max[seg])
    denom = np.zeros(num_segments)
    np.add.at(denom, seg, e)
    data = e / denom[seg]
    out = _make(data, (logits,), "segment_softmax")

    def _bw():
        if logits.requires_grad or logits._prev:
            g = out.grad
            seg_dot = np.zeros(num_segments)
            np.add.at(seg_dot, seg, out.data * g)
            logits._accumulate(out.data * (g - seg_dot[seg]))

    out._backward = _bw
    return out


def segment_sum(values: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of `values` by segment id: out[s] = sum of rows with segments == s."""
    seg = np.asarray(segments, dtype=np.int64)
    if values.data.ndim != 2 or seg.shape[0] != values.data.shape[0]:
        raise ShapeError(
            f"segment_sum: values {values.shape} rows must match segments {seg.shape}"
        )
    data = np.zeros((num_segments, values.data.shape[1]))
    np.add.at(data, seg, values.data)
    out = _make(data, (values,), "segment_sum")

    def _bw():
        if values.requires_grad or values._prev:
            values._accumulate(out.grad[seg])

    out._backward = _bw
    return out


# -- loss helpers --------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy from logits, computed stably."""
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != logits.data.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs targets {y.shape}")
    z = logits.data
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    data = np.asarray(loss.mean())
    out = _make(data, (logits,), "bce_with_logits")

    def _bw():
        if logits.requires_grad or logits._prev:
            p = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
            logits._accumulate(out.grad * (p - y) / y.size)

    out._backward = _bw
    return out


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean softmax cross-entropy over rows of a 2-D logit matrix."""
    idx = np.asarray(targets, dtype=np.int64)
    logp = log_softmax(logits, axis=-1)
    picked = pick(logp, idx)
    return mul(mean(picked), -1.0)
