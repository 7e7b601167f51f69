"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tape` records every primitive applied to :class:`Var` values in
execution order; :meth:`Tape.backward` walks the record in reverse and
accumulates vector-Jacobian products. Plain numpy arrays and Python scalars
mixed into an expression are treated as constants.

    >>> t = Tape()
    >>> x = t.leaf(np.array([[1.0, 2.0]]))
    >>> y = (x * x).sum()
    >>> t.backward(y)[x]
    array([[2., 4.]])
"""

from __future__ import annotations

import math

import numpy as np

from idc.numcore.special import erf as _erf


class _Node:
    __slots__ = ("parents", "vjp")

    def __init__(self, parents, vjp):
        self.parents = parents
        self.vjp = vjp


class Var:
    """A value recorded on a tape."""

    __slots__ = ("tape", "index", "value")
    __array_priority__ = 100.0

    def __init__(self, tape: "Tape", index: int, value: np.ndarray):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    @property
    def T(self):
        return transpose(self)

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return vsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def __repr__(self):
        return f"Var(#{self.index}, shape={self.value.shape})"


class Gradients:
    """Result of a backward pass; index with the leaf :class:`Var`."""

    def __init__(self, grads):
        self._grads = grads

    def __getitem__(self, v: Var) -> np.ndarray:
        g = self._grads[v.index]
        return np.zeros_like(v.value) if g is None else g


class Tape:
    """Single-writer record of primitive operations."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.values: list[np.ndarray] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value) -> Var:
        value = np.asarray(value, dtype=np.float64)
        return self._push(value, (), None)

    def _push(self, value, parents, vjp) -> Var:
        self.nodes.append(_Node(parents, vjp))
        self.values.append(value)
        return Var(self, len(self.nodes) - 1, value)

    def backward(self, root: Var) -> Gradients:
        if root.value.size != 1:
            raise ValueError("backward() needs a scalar root")
        grads: list = [None] * len(self.nodes)
        grads[root.index] = np.ones_like(root.value)
        for i in range(root.index, -1, -1):
            g = grads[i]
            node = self.nodes[i]
            if g is None or node.vjp is None:
                continue
            for p, gp in zip(node.parents, node.vjp(g)):
                if p is None or gp is None:
                    continue
                if grads[p] is None:
                    grads[p] = gp
                else:
                    grads[p] = grads[p] + gp
        return Gradients(grads)


# --------------------------------------------------------------------------
# helpers


def _tape_of(*xs):
    for x in xs:
        if isinstance(x, Var):
            return x.tape
    return None


def _val(x):
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _idx(x):
    return x.index if isinstance(x, Var) else None


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _record(value, inputs, vjp):
    tape = _tape_of(*inputs)
    if tape is None:
        return value
    return tape._push(value, tuple(_idx(x) for x in inputs), vjp)


def constant(x):
    """Detach: the value of ``x`` as a plain array (no gradient flows)."""
    return np.array(_val(x))


stop_gradient = constant


# --------------------------------------------------------------------------
# arithmetic


def add(a, b):
    av, bv = _val(a), _val(b)
    out = av + bv
    return _record(out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = _val(a), _val(b)
    out = av - bv
    return _record(out, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = _val(a), _val(b)
    out = av * bv
    return _record(out, (a, b),
                   lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b):
    av, bv = _val(a), _val(b)
    out = av / bv
    return _record(out, (a, b),
                   lambda g: (_unbroadcast(g / bv, av.shape),
                              _unbroadcast(-g * out / bv, bv.shape)))


def neg(a):
    return _record(-_val(a), (a,), lambda g: (-g,))


def power(a, p: float):
    av = _val(a)
    out = av ** p
    return _record(out, (a,), lambda g: (g * p * av ** (p - 1),))


def matmul(a, b):
    av, bv = _val(a), _val(b)
    out = av @ bv
    return _record(out, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a):
    return _record(_val(a).T, (a,), lambda g: (g.T,))


def vsum(a, axis=None, keepdims=False):
    av = _val(a)
    out = np.asarray(av.sum(axis=axis, keepdims=keepdims))

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _record(out, (a,), vjp)


def mean(a, axis=None, keepdims=False):
    av = _val(a)
    n = av.size if axis is None else av.shape[axis]
    return vsum(a, axis, keepdims) * (1.0 / n)


def getitem(a, idx):
    av = _val(a)
    out = av[idx]

    def vjp(g):
        full = np.zeros_like(av)
        np.add.at(full, idx, g)
        return (full,)

    return _record(out, (a,), vjp)


# --------------------------------------------------------------------------
# elementwise


def vabs(a):
    av = _val(a)
    return _record(np.abs(av), (a,), lambda g: (g * np.sign(av),))


def exp(a):
    out = np.exp(_val(a))
    return _record(out, (a,), lambda g: (g * out,))


def log(a):
    av = _val(a)
    return _record(np.log(av), (a,), lambda g: (g / av,))


def sqrt(a):
    out = np.sqrt(_val(a))
    return _record(out, (a,), lambda g: (g * 0.5 / out,))


def leaky_relu(a, slope: float = 0.01):
    av = _val(a)
    pos = av > 0
    out = np.where(pos, av, slope * av)
    return _record(out, (a,), lambda g: (np.where(pos, g, slope * g),))


def tanh(a):
    out = np.tanh(_val(a))
    return _record(out, (a,), lambda g: (g * (1.0 - out * out),))


def clamp_st(a, lo: float = 0.0, hi: float = 1.0):
    """Hard clamp whose gradient is 1 strictly inside (lo, hi) and 0 outside."""
    av = _val(a)
    inside = (av > lo) & (av < hi)
    return _record(np.clip(av, lo, hi), (a,), lambda g: (g * inside,))


_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)


def erf(a):
    av = _val(a)
    return _record(_erf(av), (a,), lambda g: (g * _TWO_OVER_SQRT_PI * np.exp(-av * av),))


# --------------------------------------------------------------------------
# row-wise reductions


def logsumexp(a, axis: int = -1):
    av = _val(a)
    m = av.max(axis=axis, keepdims=True)
    e = np.exp(av - m)
    s = e.sum(axis=axis, keepdims=True)
    out = (np.log(s) + m).squeeze(axis)
    soft = e / s
    return _record(out, (a,), lambda g: (np.expand_dims(g, axis) * soft,))


def log_softmax(a, axis: int = -1):
    av = _val(a)
    m = av.max(axis=axis, keepdims=True)
    shifted = av - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)
    return _record(out, (a,), lambda g: (g - soft * g.sum(axis=axis, keepdims=True),))


def softmax(a, axis: int = -1):
    av = _val(a)
    e = np.exp(av - av.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)
    return _record(out, (a,), lambda g: (out * (g - (g * out).sum(axis=axis, keepdims=True)),))


def l2_normalize_rows(a, eps: float = 0.0):
    """Scale each row to unit Euclidean norm; all-zero rows stay zero."""
    av = _val(a)
    norms = np.sqrt((av * av).sum(axis=1, keepdims=True))
    safe = np.where(norms > eps, norms, 1.0)
    zero = norms <= eps
    out = np.where(zero, 0.0, av / safe)

    def vjp(g):
        proj = (g * out).sum(axis=1, keepdims=True)
        return (np.where(zero, 0.0, (g - out * proj) / safe),)

    return _record(out, (a,), vjp)


def logdet_spd(a, jitter: float = 1e-9):
    """log det of a symmetric positive-definite matrix (see :mod:`idc.numcore.linalg`)."""
    from idc.numcore.linalg import logdet_and_inverse

    value, inv = logdet_and_inverse(_val(a), jitter=jitter)
    return _record(np.asarray(value), (a,), lambda g: (g * inv,))
