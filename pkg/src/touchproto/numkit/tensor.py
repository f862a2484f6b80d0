"""Dense tensors with reverse-mode automatic differentiation.

Small tape: every differentiable op returns a Tensor that remembers its
parents and a closure accumulating gradients into them. Arrays are plain
numpy (float32 for training, float64 when verifying gradients).
"""

from __future__ import annotations

import contextlib

import numpy as np


class ShapeError(ValueError):
    """Operand extents do not match the operation's contract."""


class ContractError(RuntimeError):
    """An API precondition was violated (non-scalar loss, missing grads, ...)."""


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable taping inside the block; forwards become plain numpy."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def item(self):
        return float(self.data.reshape(-1)[0])


def constant(data):
    return Tensor(data, requires_grad=False)


def parameter(data):
    return Tensor(np.array(data, copy=True), requires_grad=True)


def _node(data, parents, backward_fn):
    """Build an output tensor, taping it only when some parent needs grads."""
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        # copy: g may alias an upstream buffer shared with another parent
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        t.grad += g


def _accum_owned(t: Tensor, g: np.ndarray):
    """Accumulate a freshly allocated gradient the caller hands over."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _astensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def add(a, b) -> Tensor:
    a, b = _astensor(a), _astensor(b)
    out_data = a.data + b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _node(out_data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _astensor(a), _astensor(b)
    out_data = a.data - b.data

    def backward(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _node(out_data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _astensor(a), _astensor(b)
    out_data = a.data * b.data

    def backward(g):
        _accum_owned(a, _unbroadcast(g * b.data, a.data.shape))
        _accum_owned(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(out_data, (a, b), backward)


def scale(a, k: float) -> Tensor:
    a = _astensor(a)
    k = a.data.dtype.type(k)
    out_data = a.data * k

    def backward(g):
        _accum_owned(a, g * k)

    return _node(out_data, (a,), backward)


def neg(a) -> Tensor:
    return scale(a, -1.0)


def linear(x, w, b) -> Tensor:
    """Fused x @ w + b for 2-D x; one backward closure, no broadcast bookkeeping."""
    x, w, b = _astensor(x), _astensor(w), _astensor(b)
    if x.data.ndim != 2 or w.data.ndim != 2:
        raise ShapeError(f"linear expects 2-D operands, got {x.data.shape} @ {w.data.shape}")
    if x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"linear inner extents differ: {x.data.shape} @ {w.data.shape}")
    out_data = x.data @ w.data
    out_data += b.data

    def backward(g):
        if x.requires_grad:
            _accum_owned(x, g @ w.data.T)
        if w.requires_grad:
            _accum_owned(w, x.data.T @ g)
        if b.requires_grad:
            _accum_owned(b, g.sum(axis=0))

    return _node(out_data, (x, w, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _astensor(a), _astensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner extents differ: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def backward(g):
        _accum_owned(a, g @ b.data.T)
        _accum_owned(b, a.data.T @ g)

    return _node(out_data, (a, b), backward)


def tanh(a) -> Tensor:
    a = _astensor(a)
    y = np.tanh(a.data)

    def backward(g):
        _accum_owned(a, g * (1.0 - y * y))

    return _node(y, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _astensor(a)
    # stable: 0.5 * (1 + tanh(x/2))
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))

    def backward(g):
        _accum_owned(a, g * y * (1.0 - y))

    return _node(y.astype(a.data.dtype, copy=False), (a,), backward)


def relu(a) -> Tensor:
    a = _astensor(a)
    mask = a.data > 0
    out_data = a.data * mask

    def backward(g):
        _accum_owned(a, g * mask)

    return _node(out_data, (a,), backward)


def exp(a) -> Tensor:
    a = _astensor(a)
    y = np.exp(a.data)

    def backward(g):
        _accum_owned(a, g * y)

    return _node(y, (a,), backward)


def square(a) -> Tensor:
    a = _astensor(a)
    out_data = a.data * a.data

    def backward(g):
        _accum_owned(a, g * (2.0 * a.data))

    return _node(out_data, (a,), backward)


def sqrt(a) -> Tensor:
    a = _astensor(a)
    y = np.sqrt(a.data)

    def backward(g):
        _accum_owned(a, g * (0.5 / y))

    return _node(y, (a,), backward)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient is passed through inside the range, zero outside."""
    a = _astensor(a)
    out_data = np.clip(a.data, lo, hi)
    mask = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        _accum_owned(a, g * mask)

    return _node(out_data, (a,), backward)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _astensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=False))
        else:
            ge = g if keepdims else np.expand_dims(g, axis)
            _accum(a, np.broadcast_to(ge, a.data.shape).astype(a.data.dtype, copy=False))

    return _node(out_data, (a,), backward)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _astensor(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return scale(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(parts, axis=-1) -> Tensor:
    parts = [_astensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            _accum(p, piece)

    return _node(out_data, tuple(parts), backward)


def layer_norm(a, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to zero mean / unit variance (no gain, no bias)."""
    a = _astensor(a)
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def backward(g):
        # d/dx of (x - mu) / s: (g - mean(g) - y * mean(g*y)) / s
        gm = g.mean(axis=-1, keepdims=True)
        gym = (g * y).mean(axis=-1, keepdims=True)
        _accum_owned(a, (g - gm - y * gym) * inv)

    return _node(y.astype(a.data.dtype, copy=False), (a,), backward)


def backward(loss: Tensor):
    """Run reverse-mode accumulation from a scalar loss over the recorded tape."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
