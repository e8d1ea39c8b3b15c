"""Minimal reverse-mode automatic differentiation over numpy arrays.

Values live in numpy arrays. Every primitive accepts plain arrays/floats as well
as :class:`Tensor` objects; when none of the inputs is a tensor the primitive
simply returns the numpy result, so the same numerical code serves both the
plain evaluation path and the differentiable one.

>>> tape = Tape()
>>> x = tape.variable(3.0)
>>> grads = tape.backward(x * x)
>>> float(grads[x])
6.0
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationError, GraphError, NonFiniteError, ShapeError

__all__ = [
    "Tape", "Tensor", "Gradients", "value_of", "is_tensor", "finite_diff_check",
    "add", "sub", "mul", "div", "neg", "square", "matmul", "spmm", "sum", "mean",
    "norm2", "sqrt", "exp", "log", "log1p", "tanh", "tan", "sin", "cos", "cosh",
    "sinh", "arccos", "arccosh", "acosh1p", "acos1m", "softplus", "relu",
    "leaky_relu", "minimum", "where", "softmax", "log_softmax", "concatenate",
    "split", "broadcast_to", "reshape", "transpose", "index", "take_along_axis",
    "fill_diagonal",
]


@dataclass(frozen=True)
class _Node:
    op: str
    inputs: tuple
    value: np.ndarray
    vjp: Callable | None


class Tensor:
    """Handle to a node on a :class:`Tape`."""

    __slots__ = ("tape", "index")
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, tape: "Tape", index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def __repr__(self):
        return f"Tensor(#{self.index}, {self.tape.nodes[self.index].op}, shape={self.shape})"

    def __len__(self):
        return len(self.value)

    def __float__(self):
        return float(self.value)

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

    def __pow__(self, p):
        if p == 2:
            return square(self)
        raise NotImplementedError("only squaring is supported")

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, key):
        return index(self, key)


class Gradients:
    """Adjoints from one backward pass; unreached nodes read as zeros."""

    def __init__(self, tape: "Tape", adjoints: list):
        self._tape = tape
        self._adj = adjoints

    def __getitem__(self, t: Tensor) -> np.ndarray:
        if t.tape is not self._tape:
            raise GraphError("tensor belongs to a different tape")
        g = self._adj[t.index]
        if g is None:
            return np.zeros_like(t.value)
        return g


class Tape:
    """Append-only record of primitive applications.

    With ``checked=True`` every recorded value is screened for NaN and +inf;
    -inf is only tolerated from primitives that mask entries on purpose.
    """

    def __init__(self, checked: bool = True):
        self.nodes: list[_Node] = []
        self.checked = checked

    def __len__(self):
        return len(self.nodes)

    def variable(self, value, name: str = "leaf") -> Tensor:
        v = np.array(value, dtype=float)
        self.nodes.append(_Node(name, (), v, None))
        return Tensor(self, len(self.nodes) - 1)

    def record(self, op: str, inputs: Sequence, forward, vjp=None,
               allow_neg_inf: bool = False) -> Tensor:
        """Append a node computed from ``inputs`` (node ids, ``None`` for constants)."""
        n = len(self.nodes)
        ids = []
        for i in inputs:
            if i is not None and not (isinstance(i, (int, np.integer)) and 0 <= i < n):
                raise GraphError(f"{op}: dangling input id {i!r}")
            ids.append(None if i is None else int(i))
        v = np.asarray(forward, dtype=float)
        if self.checked:
            bad = np.isnan(v) | np.isposinf(v)
            if not allow_neg_inf:
                bad |= np.isneginf(v)
            if bad.any():
                raise NonFiniteError(f"non-finite value produced by {op}")
        self.nodes.append(_Node(op, tuple(ids), v, vjp))
        return Tensor(self, n)

    def backward(self, output: Tensor) -> Gradients:
        if output.tape is not self:
            raise GraphError("output belongs to a different tape")
        if output.value.size != 1:
            raise ShapeError(f"backward needs a scalar output, got shape {output.shape}")
        adj: list = [None] * len(self.nodes)
        adj[output.index] = np.ones_like(output.value)
        for idx in range(output.index, -1, -1):
            g = adj[idx]
            node = self.nodes[idx]
            if g is None or node.vjp is None:
                continue
            parts = node.vjp(g)
            for inp, gi in zip(node.inputs, parts):
                if inp is None or gi is None:
                    continue
                gi = np.asarray(gi, dtype=float)
                adj[inp] = gi if adj[inp] is None else adj[inp] + gi
        return Gradients(self, adj)


def is_tensor(x) -> bool:
    return isinstance(x, Tensor)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Tensor) else np.asarray(x, dtype=float)


def _tape_of(args) -> Tape | None:
    tape = None
    for a in args:
        if isinstance(a, Tensor):
            if tape is None:
                tape = a.tape
            elif a.tape is not tape:
                raise GraphError("operands live on different tapes")
    return tape


def _apply(op, args, value, vjp, allow_neg_inf=False):
    tape = _tape_of(args)
    if tape is None:
        return value
    ids = [a.index if isinstance(a, Tensor) else None for a in args]
    return tape.record(op, ids, value, vjp, allow_neg_inf=allow_neg_inf)


def _unbroadcast(g, shape):
    g = np.asarray(g)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _unary(op, x, f, dfdx):
    """Elementwise primitive; ``dfdx(xv, yv)`` gives the local derivative."""
    xv = value_of(x)
    with np.errstate(all="ignore"):
        yv = f(xv)
    return _apply(op, (x,), yv, lambda g: (g * dfdx(xv, yv),))


# -- arithmetic -------------------------------------------------------------

def add(a, b):
    av, bv = value_of(a), value_of(b)
    return _apply("add", (a, b), av + bv,
                  lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    return _apply("sub", (a, b), av - bv,
                  lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    return _apply("mul", (a, b), av * bv,
                  lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def div(a, b):
    av, bv = value_of(a), value_of(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = av / bv
    return _apply("div", (a, b), out,
                  lambda g: (_unbroadcast(g / bv, av.shape),
                             _unbroadcast(-g * av / (bv * bv), bv.shape)))


def neg(a):
    return _apply("neg", (a,), -value_of(a), lambda g: (-g,))


def square(a):
    av = value_of(a)
    return _apply("square", (a,), av * av, lambda g: (2.0 * g * av,))


def matmul(a, b):
    """Matrix product for 2-D @ 2-D and 2-D @ 1-D operands."""
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim not in (1, 2) or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shapes {av.shape} @ {bv.shape}")

    def vjp(g):
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return _apply("matmul", (a, b), av @ bv, vjp)


def spmm(A, h):
    """Constant sparse (or dense) matrix times a differentiable dense matrix."""
    hv = value_of(h)
    out = np.asarray(A @ hv)
    return _apply("spmm", (h,), out, lambda g: (np.asarray(A.T @ g),))


# -- reductions -------------------------------------------------------------

def _expand(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    xv = value_of(x)
    return _apply("sum", (x,), np.sum(xv, axis=axis, keepdims=keepdims),
                  lambda g: (_expand(g, xv.shape, axis, keepdims).copy(),))


def mean(x, axis=None, keepdims=False):
    xv = value_of(x)
    count = xv.size if axis is None else xv.shape[axis]
    return _apply("mean", (x,), np.mean(xv, axis=axis, keepdims=keepdims),
                  lambda g: (_expand(g, xv.shape, axis, keepdims) / count,))


def norm2(x, axis=-1, keepdims=False):
    """Euclidean norm along ``axis``; zero subgradient at the zero vector."""
    xv = value_of(x)
    nv = np.sqrt(np.sum(xv * xv, axis=axis, keepdims=True))

    def vjp(g):
        ge = g if keepdims else np.expand_dims(g, axis)
        safe = np.where(nv > 0, nv, 1.0)
        return (np.where(nv > 0, ge * xv / safe, 0.0),)

    out = nv if keepdims else np.squeeze(nv, axis=axis)
    return _apply("norm2", (x,), out, vjp)


# -- elementwise ------------------------------------------------------------

def sqrt(x):
    return _unary("sqrt", x, np.sqrt,
                  lambda xv, yv: np.where(yv > 0, 0.5 / np.where(yv > 0, yv, 1.0), 0.0))


def exp(x):
    return _unary("exp", x, np.exp, lambda xv, yv: yv)


def log(x):
    return _unary("log", x, np.log, lambda xv, yv: 1.0 / xv)


def log1p(x):
    return _unary("log1p", x, np.log1p, lambda xv, yv: 1.0 / (1.0 + xv))


def tanh(x):
    return _unary("tanh", x, np.tanh, lambda xv, yv: 1.0 - yv * yv)


def tan(x):
    return _unary("tan", x, np.tan, lambda xv, yv: 1.0 + yv * yv)


def sin(x):
    return _unary("sin", x, np.sin, lambda xv, yv: np.cos(xv))


def cos(x):
    return _unary("cos", x, np.cos, lambda xv, yv: -np.sin(xv))


def cosh(x):
    return _unary("cosh", x, np.cosh, lambda xv, yv: np.sinh(xv))


def sinh(x):
    return _unary("sinh", x, np.sinh, lambda xv, yv: np.cosh(xv))


def _interior(mask, expr):
    return np.where(mask, expr, 0.0)


def arccos(x):
    """arccos with the input clamped to [-1, 1]; zero gradient where clamped."""
    def d(xv, yv):
        inside = np.abs(xv) < 1.0
        return _interior(inside, -1.0 / np.sqrt(np.where(inside, 1.0 - xv * xv, 1.0)))
    return _unary("arccos", x, lambda v: np.arccos(np.clip(v, -1.0, 1.0)), d)


def arccosh(x):
    """arccosh with the input clamped to >= 1; zero gradient where clamped."""
    def d(xv, yv):
        inside = xv > 1.0
        return _interior(inside, 1.0 / np.sqrt(np.where(inside, xv * xv - 1.0, 1.0)))
    return _unary("arccosh", x, lambda v: np.arccosh(np.maximum(v, 1.0)), d)


def _acosh1p(z):
    z = np.maximum(z, 0.0)
    return np.log1p(z + np.sqrt(z * (z + 2.0)))


def acosh1p(z):
    """arccosh(1 + z) evaluated without cancellation for small z (z clamped >= 0)."""
    def d(zv, yv):
        inside = zv > 0.0
        return _interior(inside, 1.0 / np.sqrt(np.where(inside, zv * (zv + 2.0), 1.0)))
    return _unary("acosh1p", z, _acosh1p, d)


def _acos1m(z):
    z = np.clip(z, 0.0, 2.0)
    return 2.0 * np.arcsin(np.sqrt(0.5 * z))


def acos1m(z):
    """arccos(1 - z) evaluated without cancellation for small z (z clamped to [0, 2])."""
    def d(zv, yv):
        inside = (zv > 0.0) & (zv < 2.0)
        return _interior(inside, 1.0 / np.sqrt(np.where(inside, zv * (2.0 - zv), 1.0)))
    return _unary("acos1m", z, _acos1m, d)


def _sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(x):
    return _unary("softplus", x,
                  lambda v: np.log1p(np.exp(-np.abs(v))) + np.maximum(v, 0.0),
                  lambda xv, yv: _sigmoid(xv))


def relu(x):
    return _unary("relu", x, lambda v: np.maximum(v, 0.0),
                  lambda xv, yv: (xv > 0).astype(float))


def leaky_relu(x, slope=0.2):
    return _unary("leaky_relu", x, lambda v: np.where(v > 0, v, slope * v),
                  lambda xv, yv: np.where(xv > 0, 1.0, slope))


def minimum(a, b):
    """Elementwise minimum; ties send the gradient to ``a``."""
    av, bv = value_of(a), value_of(b)
    pick_a = av <= bv
    return _apply("minimum", (a, b), np.where(pick_a, av, bv),
                  lambda g: (_unbroadcast(np.where(pick_a, g, 0.0), av.shape),
                             _unbroadcast(np.where(pick_a, 0.0, g), bv.shape)))


def where(cond, a, b):
    c = np.asarray(cond, dtype=bool)
    av, bv = value_of(a), value_of(b)
    return _apply("where", (a, b), np.where(c, av, bv),
                  lambda g: (_unbroadcast(np.where(c, g, 0.0), av.shape),
                             _unbroadcast(np.where(c, 0.0, g), bv.shape)),
                  allow_neg_inf=True)


# -- softmax family ---------------------------------------------------------

def _log_softmax_np(xv, axis):
    m = np.max(xv, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        lse = m + np.log(np.sum(np.exp(xv - m), axis=axis, keepdims=True))
    return xv - lse


def log_softmax(x, axis=-1):
    """Log-softmax along ``axis``; -inf inputs are masked entries and stay -inf."""
    xv = value_of(x)
    yv = _log_softmax_np(xv, axis)
    p = np.exp(yv)

    def vjp(g):
        g = np.where(np.isneginf(yv), 0.0, g)
        return (g - p * np.sum(g, axis=axis, keepdims=True),)

    return _apply("log_softmax", (x,), yv, vjp, allow_neg_inf=True)


def softmax(x, axis=-1):
    xv = value_of(x)
    p = np.exp(_log_softmax_np(xv, axis))

    def vjp(g):
        return (p * (g - np.sum(g * p, axis=axis, keepdims=True)),)

    return _apply("softmax", (x,), p, vjp)


# -- structural -------------------------------------------------------------

def concatenate(xs, axis=-1):
    vals = [value_of(x) for x in xs]
    ax = axis % vals[0].ndim
    bounds = np.cumsum([0] + [v.shape[ax] for v in vals])

    def vjp(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax)
                     for i in range(len(vals)))

    return _apply("concatenate", tuple(xs), np.concatenate(vals, axis=ax), vjp)


def split(x, sizes, axis=-1):
    """Split ``x`` into consecutive blocks of the given sizes along ``axis``."""
    xv = value_of(x)
    ax = axis % xv.ndim
    if int(np.sum(sizes)) != xv.shape[ax]:
        raise ShapeError(f"split sizes {list(sizes)} do not cover axis of length {xv.shape[ax]}")
    out, start = [], 0
    for s in sizes:
        key = [slice(None)] * xv.ndim
        key[ax] = slice(start, start + s)
        out.append(index(x, tuple(key)))
        start += s
    return out


def broadcast_to(x, shape):
    xv = value_of(x)
    return _apply("broadcast_to", (x,), np.broadcast_to(xv, shape).copy(),
                  lambda g: (_unbroadcast(g, xv.shape),))


def reshape(x, shape):
    xv = value_of(x)
    return _apply("reshape", (x,), xv.reshape(shape), lambda g: (g.reshape(xv.shape),))


def transpose(x):
    return _apply("transpose", (x,), value_of(x).T, lambda g: (g.T,))


def index(x, key):
    xv = value_of(x)

    def vjp(g):
        out = np.zeros_like(xv)
        np.add.at(out, key, g)
        return (out,)

    return _apply("index", (x,), xv[key], vjp, allow_neg_inf=True)


def take_along_axis(x, idx, axis=-1):
    xv = value_of(x)
    idx = np.asarray(idx)

    def vjp(g):
        out = np.zeros_like(xv)
        grid = list(np.indices(idx.shape, sparse=True))
        grid[axis % xv.ndim] = idx
        np.add.at(out, tuple(grid), g)
        return (out,)

    return _apply("take_along_axis", (x,), np.take_along_axis(xv, idx, axis), vjp,
                  allow_neg_inf=True)


def fill_diagonal(x, fill):
    """Copy of a square matrix with its diagonal overwritten (no gradient there)."""
    xv = value_of(x).copy()
    np.fill_diagonal(xv, fill)
    eye = np.eye(xv.shape[0], dtype=bool)
    return _apply("fill_diagonal", (x,), xv, lambda g: (np.where(eye, 0.0, g),),
                  allow_neg_inf=True)


# -- gradient checking ------------------------------------------------------

def finite_diff_check(f, x, step: float = 1e-5) -> float:
    """Largest relative gap between the tape gradient and central differences.

    ``f`` maps a parameter vector (tensor or array) to a scalar.
    """
    x = np.array(x, dtype=float)
    tape = Tape()
    xt = tape.variable(x)
    out = f(xt)
    if not isinstance(out, Tensor):
        grad = np.zeros_like(x)
    else:
        grad = tape.backward(out)[xt]
    worst = 0.0
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += step
        xm[i] -= step
        fp, fm = value_of(f(xp)).item(), value_of(f(xm)).item()
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"function is not finite near coordinate {i}")
        central = (fp - fm) / (2.0 * step)
        err = abs(grad[i] - central) / max(abs(central), 1e-8)
        worst = max(worst, err)
    return worst
