"""Dense float64 tensors with tape-based reverse-mode differentiation.

Values are numpy arrays. While a ``Tape`` is active (``with Tape():``),
every operation whose operands are gradient-tracked records a backward rule
onto it; ``backward(loss)`` then walks the tape in reverse and accumulates
gradients into every ``requires_grad`` leaf. Without an active tape the same
operations run as plain numpy computations, which is how inference works.

A tape serves exactly one forward/backward cycle and is discarded
afterwards. Tensors produced under one tape must not be fed into ops under
a later tape; parameters (true leaves) are the only tensors meant to
outlive a step.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ShapeError

_active_tape = None


def _as_array(data):
    return np.asarray(data, dtype=np.float64)


def _lift(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    """An n-dimensional float64 array, optionally recorded on the active tape.

    The value is immutable by convention once created; only an optimizer
    reassigns ``.data`` between training steps. ``grad`` is populated for
    leaves by ``backward`` and accumulates across calls until cleared.
    """

    __slots__ = ("data", "requires_grad", "grad", "_tape", "_node")

    def __init__(self, data, requires_grad=False):
        self.data = _as_array(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._tape = None
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(())[()])

    def detach(self):
        """A view of the same value with no gradient tracking."""
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # arithmetic delegates to the module-level ops so everything records
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def var(self, axis=None, keepdims=False):
        return reduce_var(self, axis, keepdims)

    def relu(self):
        return relu(self)

    def square(self):
        return square(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return absolute(self)


class Tape:
    """Append-only record of one forward computation.

    Nodes are appended in execution order, so every node's operands precede
    it and a single reverse sweep is a valid backward schedule. Leaves
    (parameters) are registered lazily the first time an op consumes them.
    """

    def __init__(self):
        self._inputs = []   # per node: tuple of operand node ids
        self._vjps = []     # per node: tuple of vector-Jacobian callbacks
        self._leaves = []   # per node: the leaf Tensor, or None for op nodes
        self._consumed = False

    def __len__(self):
        return len(self._inputs)

    def __enter__(self):
        global _active_tape
        if _active_tape is not None:
            raise ContractError("a tape is already active; tapes do not nest")
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _active_tape
        _active_tape = None
        return False

    def _append(self, input_ids, vjps, leaf=None):
        self._inputs.append(tuple(input_ids))
        self._vjps.append(tuple(vjps))
        self._leaves.append(leaf)
        return len(self._inputs) - 1

    def _node_of(self, t):
        if t._tape is self:
            return t._node
        # first use of a requires_grad leaf on this tape
        nid = self._append((), (), leaf=t)
        t._tape = self
        t._node = nid
        return nid


def _record(out, pairs):
    """Attach `out` to the active tape if any operand is gradient-tracked.

    pairs: list of (operand Tensor, vjp) where vjp maps the output gradient
    to that operand's gradient contribution.
    """
    tape = _active_tape
    if tape is None:
        return out
    if tape._consumed:
        raise ContractError("tape was already consumed by backward()")
    live = [(t, v) for t, v in pairs if t.requires_grad or t._tape is tape]
    if not live:
        return out
    ids = [tape._node_of(t) for t, _ in live]
    out._node = tape._append(ids, [v for _, v in live])
    out._tape = tape
    out.requires_grad = True
    return out


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf on the tape.

    Returns a map {leaf Tensor: gradient array}. Leaves registered on the
    tape but unreachable from the loss receive a zero gradient. The tape is
    consumed and cannot be reused.
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        got = loss.shape if isinstance(loss, Tensor) else type(loss)
        raise ContractError(f"backward target must be a scalar tensor, got {got}")
    tape = loss._tape
    if tape is None:
        raise ContractError("loss is not recorded on any tape")
    if tape._consumed:
        raise ContractError("tape was already consumed by backward()")
    tape._consumed = True

    grads = [None] * len(tape)
    grads[loss._node] = np.ones_like(loss.data)
    for nid in range(len(tape) - 1, -1, -1):
        g = grads[nid]
        if g is None:
            continue
        grads[nid] = None
        leaf = tape._leaves[nid]
        if leaf is not None:
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.data)
            leaf.grad = leaf.grad + g
            continue
        for iid, vjp in zip(tape._inputs[nid], tape._vjps[nid]):
            contrib = vjp(g)
            grads[iid] = contrib if grads[iid] is None else grads[iid] + contrib

    result = {}
    for leaf in tape._leaves:
        if leaf is None:
            continue
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.data)
        result[leaf] = leaf.grad
    return result


def is_finite(t):
    """True when every element of the tensor is finite."""
    return bool(np.isfinite(_lift(t).data).all())


# ---------------------------------------------------------------------------
# broadcasting helpers


def _broadcast_check(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def _unbroadcast(g, shape):
    """Sum a gradient over the axes numpy broadcasting expanded."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _norm_axis(axis, ndim, op):
    ax = axis + ndim if axis < 0 else axis
    if not 0 <= ax < ndim:
        raise ShapeError(f"{op}: axis {axis} out of range for rank {ndim}")
    return ax


# ---------------------------------------------------------------------------
# elementwise ops


def add(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_check(a.data, b.data, "add")
    out = Tensor(a.data + b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(g, b.data.shape)),
    ])


def sub(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_check(a.data, b.data, "sub")
    out = Tensor(a.data - b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g, a.data.shape)),
        (b, lambda g: _unbroadcast(-g, b.data.shape)),
    ])


def mul(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_check(a.data, b.data, "mul")
    out = Tensor(a.data * b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
    ])


def div(a, b):
    a, b = _lift(a), _lift(b)
    _broadcast_check(a.data, b.data, "div")
    out = Tensor(a.data / b.data)
    return _record(out, [
        (a, lambda g: _unbroadcast(g / b.data, a.data.shape)),
        (b, lambda g: _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)),
    ])


def neg(a):
    a = _lift(a)
    out = Tensor(-a.data)
    return _record(out, [(a, lambda g: -g)])


def relu(a):
    a = _lift(a)
    out = Tensor(np.maximum(a.data, 0.0))
    return _record(out, [(a, lambda g: g * (a.data > 0.0))])


def square(a):
    a = _lift(a)
    out = Tensor(a.data * a.data)
    return _record(out, [(a, lambda g: g * (2.0 * a.data))])


def sqrt(a):
    a = _lift(a)
    y = np.sqrt(a.data)
    out = Tensor(y)
    return _record(out, [(a, lambda g: g * (0.5 / y))])


def absolute(a):
    a = _lift(a)
    out = Tensor(np.abs(a.data))
    return _record(out, [(a, lambda g: g * np.sign(a.data))])


def where(cond, a, b):
    """Elementwise select; the condition is a constant (no gradient)."""
    c = np.asarray(cond.data if isinstance(cond, Tensor) else cond, dtype=bool)
    a, b = _lift(a), _lift(b)
    try:
        np.broadcast_shapes(c.shape, a.data.shape, b.data.shape)
    except ValueError:
        raise ShapeError(
            f"where: shapes {c.shape}, {a.data.shape}, {b.data.shape} do not broadcast"
        ) from None
    out = Tensor(np.where(c, a.data, b.data))
    return _record(out, [
        (a, lambda g: _unbroadcast(np.where(c, g, 0.0), a.data.shape)),
        (b, lambda g: _unbroadcast(np.where(c, 0.0, g), b.data.shape)),
    ])


# ---------------------------------------------------------------------------
# matrix product


def matmul(a, b):
    """Matrix product over the trailing two axes; leading axes broadcast."""
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires rank >= 2 operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner extents differ: {a.shape} x {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: batch extents differ: {a.shape} x {b.shape}") from None
    out = Tensor(a.data @ b.data)

    def vjp_a(g):
        return _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)

    def vjp_b(g):
        return _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)

    return _record(out, [(a, vjp_a), (b, vjp_b)])


# ---------------------------------------------------------------------------
# softmax


def softmax(a, axis):
    """Numerically stable softmax along one axis.

    Rows whose entries are all -inf produce NaN; keeping at least one finite
    entry per row is the caller's responsibility (mask rows always retain
    the diagonal).
    """
    a = _lift(a)
    ax = _norm_axis(axis, a.ndim, "softmax")
    x = a.data
    m = np.max(x, axis=ax, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    y = e / e.sum(axis=ax, keepdims=True)
    out = Tensor(y)

    def vjp(g):
        inner = (g * y).sum(axis=ax, keepdims=True)
        return y * (g - inner)

    return _record(out, [(a, vjp)])


# ---------------------------------------------------------------------------
# reductions


def _expand_reduced(g, in_shape, axis, keepdims):
    if not keepdims:
        if axis is None:
            g = g.reshape((1,) * len(in_shape))
        else:
            g = np.expand_dims(g, axis)
    return np.broadcast_to(g, in_shape)


def reduce_sum(a, axis=None, keepdims=False):
    a = _lift(a)
    ax = None if axis is None else _norm_axis(axis, a.ndim, "sum")
    out = Tensor(a.data.sum(axis=ax, keepdims=keepdims))
    shape = a.data.shape
    return _record(out, [(a, lambda g: _expand_reduced(g, shape, ax, keepdims).copy())])


def reduce_mean(a, axis=None, keepdims=False):
    a = _lift(a)
    ax = None if axis is None else _norm_axis(axis, a.ndim, "mean")
    out = Tensor(a.data.mean(axis=ax, keepdims=keepdims))
    shape = a.data.shape
    count = a.data.size if ax is None else shape[ax]
    return _record(out, [(a, lambda g: _expand_reduced(g, shape, ax, keepdims) / count)])


def reduce_var(a, axis=None, keepdims=False):
    """Population variance (divide by the element count, not count-1)."""
    a = _lift(a)
    ax = None if axis is None else _norm_axis(axis, a.ndim, "var")
    x = a.data
    out = Tensor(x.var(axis=ax, keepdims=keepdims))
    mu = x.mean(axis=ax, keepdims=True)
    count = x.size if ax is None else x.shape[ax]

    def vjp(g):
        gk = _expand_reduced(g, x.shape, ax, keepdims)
        return gk * (2.0 / count) * (x - mu)

    return _record(out, [(a, vjp)])


_REDUCERS = {"sum": reduce_sum, "mean": reduce_mean, "var": reduce_var}


def reduce(kind, a, axis=None, keepdims=False):
    if kind not in _REDUCERS:
        raise ContractError(f"unknown reduction {kind!r}; expected one of {sorted(_REDUCERS)}")
    return _REDUCERS[kind](a, axis, keepdims)


# ---------------------------------------------------------------------------
# layout ops: exact inverse gradient routing


def reshape(a, shape):
    a = _lift(a)
    try:
        y = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {a.shape} ({a.size} elements) to {shape}") from None
    out = Tensor(y)
    return _record(out, [(a, lambda g: g.reshape(a.data.shape))])


def transpose(a, axes=None):
    a = _lift(a)
    if axes is not None and sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation of rank {a.ndim}")
    out = Tensor(a.data.transpose(axes))
    inv = None if axes is None else tuple(np.argsort(axes))
    return _record(out, [(a, lambda g: g.transpose(inv))])


def concat(tensors, axis=0):
    ts = [_lift(t) for t in tensors]
    if not ts:
        raise ShapeError("concat of an empty sequence")
    ax = _norm_axis(axis, ts[0].ndim, "concat")
    try:
        y = np.concatenate([t.data for t in ts], axis=ax)
    except ValueError:
        raise ShapeError(
            f"concat: incompatible shapes {[t.shape for t in ts]} along axis {axis}"
        ) from None
    out = Tensor(y)
    pairs = []
    start = 0
    for t in ts:
        stop = start + t.shape[ax]

        def vjp(g, _s=start, _e=stop):
            idx = [slice(None)] * g.ndim
            idx[ax] = slice(_s, _e)
            return g[tuple(idx)]

        pairs.append((t, vjp))
        start = stop
    return _record(out, pairs)


def stack(tensors, axis=0):
    ts = [_lift(t) for t in tensors]
    if not ts:
        raise ShapeError("stack of an empty sequence")
    rank = ts[0].ndim + 1
    ax = axis + rank if axis < 0 else axis
    new_shape = list(ts[0].shape)
    new_shape.insert(ax, 1)
    return concat([reshape(t, tuple(new_shape)) for t in ts], axis=ax)


_KEY_TYPES = (int, slice, type(Ellipsis), np.integer)


def take(a, key):
    """Basic slicing/indexing with gradient scatter back to the source."""
    a = _lift(a)
    parts = key if isinstance(key, tuple) else (key,)
    for p in parts:
        if not isinstance(p, _KEY_TYPES):
            raise ShapeError(f"only basic int/slice indexing is supported, got {type(p).__name__}")
    try:
        y = a.data[key]
    except IndexError as exc:
        raise ShapeError(f"index {key!r} invalid for shape {a.shape}: {exc}") from None
    out = Tensor(y)

    def vjp(g):
        gz = np.zeros_like(a.data)
        gz[key] += g
        return gz

    return _record(out, [(a, vjp)])


def broadcast_to(a, shape):
    a = _lift(a)
    try:
        y = np.broadcast_to(a.data, shape)
    except ValueError:
        raise ShapeError(f"cannot broadcast {a.shape} to {shape}") from None
    out = Tensor(y)
    return _record(out, [(a, lambda g: _unbroadcast(g, a.data.shape))])
