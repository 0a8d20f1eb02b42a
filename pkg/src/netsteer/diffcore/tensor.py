"""Dense float64 tensors with reverse-mode differentiation.

Every operation either runs in *value mode* (all inputs are plain arrays or
scalars, result is a plain ``numpy`` array) or in *graph mode* (at least one
input is a :class:`Tensor`, result is a new ``Tensor`` node recording the
operation and its parents). The same functional API therefore serves both the
differentiable model code and the fast Monte-Carlo paths.

Supported differentiable operations: add, mul, matmul, exp, log, tanh,
sigmoid, softplus, sum, elementwise max, division, power, plus the structural
``transpose``. Everything else (sub, neg, abs, min, clamp) is composed from
these.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit

__all__ = [
    "Tensor",
    "ContractViolation",
    "NumericFault",
    "val",
    "add",
    "sub",
    "neg",
    "mul",
    "div",
    "matmul",
    "power",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "softplus",
    "reduce_sum",
    "maximum",
    "minimum",
    "absolute",
    "clamp_max",
    "transpose",
    "grad",
    "value_of",
    "check_gradient",
]


class ContractViolation(ValueError):
    """An operation was called outside its documented contract."""


class NumericFault(ArithmeticError):
    """A non-finite value appeared during evaluation or differentiation."""

    def __init__(self, message: str, node_id: int | None = None, op: str | None = None):
        super().__init__(message)
        self.node_id = node_id
        self.op = op


_ids = itertools.count()


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class Tensor:
    """Immutable float64 array that participates in a differentiation graph.

    Leaf tensors are created directly from data; interior tensors are created
    by the operations below and record their parents plus a vector-Jacobian
    product used by :func:`grad`.
    """

    __slots__ = ("value", "op", "parents", "vjp", "node_id")

    # keep numpy from broadcasting over Tensor objects; reflected operators
    # (__radd__ etc.) must win so mixed ndarray/Tensor math stays in-graph
    __array_ufunc__ = None

    def __init__(self, data, _op: str = "leaf", _parents: tuple = (),
                 _vjp: Callable | None = None, _owned: bool = False):
        if _owned:
            arr = data
        else:
            arr = np.array(_as_array(data), dtype=np.float64, order="C", copy=True)
        arr.setflags(write=False)
        self.value = arr
        self.op = _op
        self.parents = _parents
        self.vjp = _vjp
        self.node_id = next(_ids)
        # one reduction instead of a full isfinite scan: any nan/inf entry
        # makes the sum non-finite (finite sums cannot overflow at our scales)
        if not math.isfinite(arr.sum()):
            raise NumericFault(
                f"non-finite values in op '{_op}' (node {self.node_id})",
                node_id=self.node_id, op=_op,
            )

    @property
    def shape(self) -> tuple:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.value.shape}, id={self.node_id})"

    # arithmetic sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __neg__(self):
        return neg(self)

    @property
    def T(self):
        return transpose(self)


def val(x) -> np.ndarray:
    """Plain array view of ``x`` whether it is a Tensor or array-like."""
    return x.value if isinstance(x, Tensor) else _as_array(x)


def value_of(x) -> np.ndarray:
    return val(x)


def _is_graph(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def _node(result, op: str, parents, vjp) -> Tensor:
    if type(result) is not np.ndarray:
        result = np.asarray(result, dtype=np.float64)
    tensor_parents = tuple(p for p in parents if isinstance(p, Tensor))
    return Tensor(result, _op=op, _parents=tensor_parents, _vjp=vjp, _owned=True)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


# binary elementwise -------------------------------------------------------

def add(a, b):
    if not _is_graph(a, b):
        return val(a) + val(b)
    av, bv = val(a), val(b)
    out = av + bv

    def vjp(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g, av.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(g, bv.shape))
        return grads

    return _node(out, "add", (a, b), vjp)


def neg(a):
    return mul(a, -1.0)


def sub(a, b):
    return add(a, mul(b, -1.0))


def mul(a, b):
    if not _is_graph(a, b):
        return val(a) * val(b)
    av, bv = val(a), val(b)
    out = av * bv

    def vjp(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g * bv, av.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(g * av, bv.shape))
        return grads

    return _node(out, "mul", (a, b), vjp)


def div(a, b):
    if not _is_graph(a, b):
        return val(a) / val(b)
    av, bv = val(a), val(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = av / bv

    def vjp(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g / bv, av.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(-g * av / (bv * bv), bv.shape))
        return grads

    return _node(out, "div", (a, b), vjp)


def maximum(a, b):
    """Elementwise max; at ties the gradient is routed to the first argument."""
    if not _is_graph(a, b):
        return np.maximum(val(a), val(b))
    av, bv = val(a), val(b)
    out = np.maximum(av, bv)
    take_a = av >= bv

    def vjp(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(_unbroadcast(g * take_a, av.shape))
        if isinstance(b, Tensor):
            grads.append(_unbroadcast(g * ~take_a, bv.shape))
        return grads

    return _node(out, "maximum", (a, b), vjp)


def minimum(a, b):
    return neg(maximum(neg(a), neg(b)))


def absolute(a):
    return maximum(a, neg(a))


def clamp_max(a, cap: float):
    return minimum(a, cap)


def matmul(a, b):
    if not _is_graph(a, b):
        return val(a) @ val(b)
    av, bv = val(a), val(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise ContractViolation("graph-mode matmul expects 2-D operands")
    out = av @ bv

    def vjp(g):
        grads = []
        if isinstance(a, Tensor):
            grads.append(g @ bv.T)
        if isinstance(b, Tensor):
            grads.append(av.T @ g)
        return grads

    return _node(out, "matmul", (a, b), vjp)


def power(a, exponent: float):
    """``a ** exponent`` for a constant scalar exponent."""
    if isinstance(exponent, Tensor):
        raise ContractViolation("power expects a constant exponent")
    c = float(exponent)
    if not _is_graph(a):
        return val(a) ** c
    av = val(a)
    out = av ** c

    def vjp(g):
        return [g * c * av ** (c - 1.0)]

    return _node(out, "power", (a,), vjp)


# unary elementwise --------------------------------------------------------

def exp(a):
    if not _is_graph(a):
        return np.exp(val(a))
    out = np.exp(val(a))

    def vjp(g):
        return [g * out]

    return _node(out, "exp", (a,), vjp)


def log(a):
    if not _is_graph(a):
        return np.log(val(a))
    av = val(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(av)

    def vjp(g):
        return [g / av]

    return _node(out, "log", (a,), vjp)


def tanh(a):
    if not _is_graph(a):
        return np.tanh(val(a))
    out = np.tanh(val(a))

    def vjp(g):
        return [g * (1.0 - out * out)]

    return _node(out, "tanh", (a,), vjp)


def sigmoid(a):
    if not _is_graph(a):
        return expit(val(a))
    out = expit(val(a))

    def vjp(g):
        return [g * out * (1.0 - out)]

    return _node(out, "sigmoid", (a,), vjp)


def _softplus_value(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus(a):
    if not _is_graph(a):
        return _softplus_value(val(a))
    av = val(a)
    out = _softplus_value(av)
    s = expit(av)

    def vjp(g):
        return [g * s]

    return _node(out, "softplus", (a,), vjp)


def reduce_sum(a, axis=None, keepdims: bool = False):
    if not _is_graph(a):
        return np.sum(val(a), axis=axis, keepdims=keepdims)
    av = a.value
    out = av.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return [np.broadcast_to(g, av.shape).copy()]

    return _node(np.asarray(out), "sum", (a,), vjp)


def transpose(a):
    if not _is_graph(a):
        return val(a).T
    out = val(a).T

    def vjp(g):
        return [g.T]

    return _node(np.ascontiguousarray(out), "transpose", (a,), vjp)


# reverse pass -------------------------------------------------------------

def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order over the graph reachable from ``root``."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(objective: Tensor, params: Sequence[Tensor]) -> list[Tensor]:
    """Gradients of a scalar objective with respect to leaf parameters.

    One backward pass per call; the forward values are untouched. Parameters
    that do not appear in the graph receive zero gradients of their shape.
    """
    if not isinstance(objective, Tensor):
        raise ContractViolation("objective must be a Tensor")
    if objective.value.size != 1:
        raise ContractViolation(
            f"objective must be scalar, got shape {objective.value.shape}"
        )
    adjoint = _backward(objective)
    grads = []
    for p in params:
        g = adjoint.get(id(p))
        if g is None:
            g = np.zeros_like(p.value)
        grads.append(Tensor(np.asarray(g, dtype=np.float64)))
    return grads


def _backward(objective: Tensor) -> dict[int, np.ndarray]:
    order = _topo_order(objective)
    adjoint: dict[int, np.ndarray] = {id(objective): np.ones_like(objective.value)}
    for node in reversed(order):
        g = adjoint.get(id(node))
        if g is None or node.vjp is None:
            continue
        for parent, pg in zip(node.parents, node.vjp(g)):
            if not math.isfinite(pg.sum()):
                raise NumericFault(
                    f"non-finite gradient at op '{node.op}' (node {node.node_id})",
                    node_id=node.node_id, op=node.op,
                )
            acc = adjoint.get(id(parent))
            adjoint[id(parent)] = pg if acc is None else acc + pg
    return adjoint


def check_gradient(build: Callable[..., Tensor], params: Sequence[Tensor],
                   fd_step: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``build(*params)`` must construct the scalar objective from leaf tensors;
    it is re-invoked at perturbed parameter values for the finite differences.
    Returns ``max |AD - FD| / (|FD| + 1e-12)`` over every parameter entry.
    """
    if fd_step <= 0:
        raise ContractViolation("fd_step must be positive")
    params = list(params)
    ad = [g.value for g in grad(build(*params), params)]
    worst = 0.0
    for k, p in enumerate(params):
        base = p.value
        flat_ad = ad[k].ravel()
        for idx in range(base.size):
            bumped = base.copy().ravel()
            bumped[idx] += fd_step
            hi = _rebuild(build, params, k, bumped.reshape(base.shape))
            bumped[idx] -= 2.0 * fd_step
            lo = _rebuild(build, params, k, bumped.reshape(base.shape))
            fd = (hi - lo) / (2.0 * fd_step)
            err = abs(flat_ad[idx] - fd) / (abs(fd) + 1e-12)
            worst = max(worst, err)
    return worst


def _rebuild(build, params, k, values) -> float:
    trial = list(params)
    trial[k] = Tensor(values)
    return float(build(*trial).value)
