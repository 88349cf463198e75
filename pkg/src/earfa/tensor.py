"""Dense tensors with reverse-mode automatic differentiation.

Feature maps are 4-D ``(batch, channel, height, width)`` float arrays in
single (float32) or double (float64) precision.  Parameters and reductions
may carry other ranks (convolution kernels are 4-D, biases 1-D, losses 0-D).

Every operation is a pure function: it never mutates its inputs and, for
identical inputs, produces bit-identical outputs.  When gradients are
enabled, each result remembers the operation that produced it together
with the saved values its backward rule needs; :meth:`Tensor.backward`
replays those records in reverse topological order.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DimensionError, NumericError, UsageError

SINGLE = np.float32
DOUBLE = np.float64

# Opt-in finiteness checking of every operator output (debug runs only).
_CHECK_FINITE = os.environ.get("EARFA_DEBUG", "0") not in ("", "0")

_grad_enabled = True


class no_grad:
    """Context manager that suspends recording of backward rules."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A NumPy-backed value participating in the autograd graph.

    Parameters
    ----------
    data : array_like
        Values; anything NumPy accepts.  Non-float input is cast to float32.
    requires_grad : bool
        Mark this tensor as a differentiation target (a leaf parameter).
    dtype : numpy dtype, optional
        Force single or double precision.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (SINGLE, DOUBLE):
            arr = arr.astype(SINGLE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None
        self._op = ""

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def astype(self, dtype) -> "Tensor":
        return Tensor(self.data.astype(dtype), requires_grad=False)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, op={self._op or 'leaf'})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    # -- backward pass -----------------------------------------------------

    def backward(self, grad=None) -> None:
        """Populate ``.grad`` on every tensor this value depends on.

        ``grad`` defaults to ones and may only be omitted for scalars.
        Raises :class:`UsageError` when called on a tensor with no recorded
        operations (a detached tensor or a leaf).
        """
        if self._backward is None:
            raise UsageError("backward() on a tensor with no recorded operations")
        if grad is None:
            if self.data.size != 1:
                raise UsageError("backward() without an explicit gradient needs a scalar")
            grad = np.ones_like(self.data)
        order = _toposort(self)
        self.grad = np.asarray(grad, dtype=self.data.dtype)
        for node in reversed(order):
            if node._backward is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g


def _toposort(root: Tensor) -> list:
    # Iterative DFS; graphs from deep models overflow the recursion limit.
    order, visited, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _result(data, parents, op: str, backward) -> Tensor:
    """Wrap an operator output, recording the backward rule when needed."""
    if _CHECK_FINITE and not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by '{op}'")
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _coerce_pair(a, b):
    if not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=b.dtype if isinstance(b, Tensor) else None))
    if not isinstance(b, Tensor):
        b = Tensor(np.asarray(b, dtype=a.dtype))
    return a, b


# -- elementwise operators --------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    data = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _result(data, (a, b), "add", backward)


def sub(a, b) -> Tensor:
    a, b = _coerce_pair(a, b)
    data = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _result(data, (a, b), "sub", backward)


def mul(a, b) -> Tensor:
    """Elementwise product with NumPy broadcasting.

    The broadcast form used throughout the attention blocks is
    ``(n, c, 1, 1) * (n, c, h, w)`` channel reweighting.
    """
    if not isinstance(b, Tensor) and np.isscalar(b):
        return scale(a, float(b))
    if not isinstance(a, Tensor) and np.isscalar(a):
        return scale(b, float(a))
    a, b = _coerce_pair(a, b)
    try:
        data = a.data * b.data
    except ValueError as exc:
        raise DimensionError(f"cannot broadcast {a.data.shape} with {b.data.shape}") from exc

    def backward(g):
        return (_unbroadcast(g * b.data, a.data.shape),
                _unbroadcast(g * a.data, b.data.shape))

    return _result(data, (a, b), "mul", backward)


def scale(x: Tensor, s: float) -> Tensor:
    data = x.data * s

    def backward(g):
        return (g * s,)

    return _result(data, (x,), "scale", backward)


def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    # Split by sign so exp never overflows.
    out = np.empty_like(xd)
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ex = np.exp(xd[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _result(out, (x,), "sigmoid", backward)


def relu(x: Tensor) -> Tensor:
    data = np.maximum(x.data, 0)

    def backward(g):
        return (g * (x.data > 0),)

    return _result(data, (x,), "relu", backward)


def absolute(x: Tensor) -> Tensor:
    data = np.abs(x.data)

    def backward(g):
        return (g * np.sign(x.data),)

    return _result(data, (x,), "abs", backward)


# -- reductions --------------------------------------------------------------


def tsum(x: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    data = x.data.sum()

    def backward(g):
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return _result(data, (x,), "sum", backward)


def tmean(x: Tensor) -> Tensor:
    """Mean of all elements, as a scalar tensor."""
    n = x.data.size
    data = x.data.mean()

    def backward(g):
        return (np.broadcast_to(g / n, x.data.shape).copy(),)

    return _result(data, (x,), "mean", backward)
