"""Dense fp64 reverse-mode automatic differentiation.

Values are numpy ``float64`` arrays.  A :class:`Node` wraps one value and
records how it was produced, so that :meth:`Node.backward` can push
gradients back through the graph.

Broadcasting is deliberately narrow: binary ops accept two equal shapes or
a scalar (0-d / single element) paired with any shape.  The one row-vector
case the network needs (bias addition) is covered by :func:`affine`.
"""

from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

__all__ = [
    "Node",
    "constant",
    "variable",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "absolute",
    "square",
    "sqrt",
    "log",
    "exp",
    "minimum",
    "maximum",
    "elementwise",
    "reduce",
    "total",
    "mean",
    "amax",
    "amin",
    "matmul",
    "affine",
    "elu",
    "column",
    "reshape",
    "detach",
    "backward",
]


def _as_array(x) -> np.ndarray:
    return np.array(x, dtype=np.float64)


class Node:
    """A value in the computation graph.

    ``grad`` stays ``None`` until ``backward`` reaches the node.  Leaves may
    be given a preallocated ``grad`` buffer (a view into a flat parameter
    gradient, for instance); backward then accumulates into it in place.
    """

    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad")

    def __init__(
        self,
        value,
        parents: tuple["Node", ...] = (),
        backward_fn: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool | None = None,
        grad: np.ndarray | None = None,
    ):
        self.value = value if isinstance(value, np.ndarray) and value.dtype == np.float64 else _as_array(value)
        self.parents = parents
        self._backward = backward_fn
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in parents)
        self.requires_grad = requires_grad
        self.grad = grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def size(self) -> int:
        return self.value.size

    def item(self) -> float:
        if self.value.size != 1:
            raise ValueError(f"item() on a node of shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    @property
    def gradient(self) -> np.ndarray:
        """``grad``, or zeros when backward never reached this node."""
        return np.zeros(self.value.shape) if self.grad is None else self.grad

    def __repr__(self) -> str:
        return f"Node(shape={self.shape}, value={self.value!r})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64).reshape(self.value.shape)
        else:
            self.grad += np.reshape(g, self.value.shape)

    # operator sugar
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

    def backward(self) -> None:
        backward(self)


def constant(value) -> Node:
    return Node(value, requires_grad=False)


def variable(value, grad: np.ndarray | None = None) -> Node:
    return Node(value, requires_grad=True, grad=grad)


def _lift(x) -> Node:
    return x if isinstance(x, Node) else constant(x)


def _is_scalar(a: np.ndarray) -> bool:
    return a.size == 1


def _check_binary(a: Node, b: Node) -> tuple[int, ...]:
    sa, sb = a.shape, b.shape
    if sa == sb:
        return sa
    if _is_scalar(a.value) and a.value.ndim <= len(sb):
        return sb
    if _is_scalar(b.value) and b.value.ndim <= len(sa):
        return sa
    raise ValueError(f"incompatible shapes {sa} and {sb}: only equal shapes or scalar-with-tensor are supported")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.reshape(g.sum(), shape)


def add(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary(a, b)
    out = Node(a.value + b.value, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    out._backward = _bw
    return out


def sub(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary(a, b)
    out = Node(a.value - b.value, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    out._backward = _bw
    return out


def mul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary(a, b)
    out = Node(a.value * b.value, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.value, b.shape))

    out._backward = _bw
    return out


def div(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    _check_binary(a, b)
    if np.any(b.value == 0.0):
        raise ValueError("division by zero")
    out = Node(a.value / b.value, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.value, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.shape))

    out._backward = _bw
    return out


def _unary(a: Node, value: np.ndarray, local_grad: Callable[[], np.ndarray]) -> Node:
    out = Node(value, (a,))

    def _bw(g):
        a._accumulate(g * local_grad())

    out._backward = _bw
    return out


def neg(a) -> Node:
    a = _lift(a)
    return _unary(a, -a.value, lambda: -1.0)


def absolute(a) -> Node:
    """|a|; the subgradient at exactly 0 is 0."""
    a = _lift(a)
    return _unary(a, np.abs(a.value), lambda: np.sign(a.value))


def square(a) -> Node:
    a = _lift(a)
    return _unary(a, a.value * a.value, lambda: 2.0 * a.value)


def sqrt(a) -> Node:
    a = _lift(a)
    if np.any(a.value < 0.0):
        raise ValueError("sqrt of negative value")
    v = np.sqrt(a.value)
    return _unary(a, v, lambda: 0.5 / v)


def log(a) -> Node:
    a = _lift(a)
    if np.any(a.value <= 0.0):
        raise ValueError("log of non-positive value")
    return _unary(a, np.log(a.value), lambda: 1.0 / a.value)


def exp(a) -> Node:
    a = _lift(a)
    v = np.exp(a.value)
    return _unary(a, v, lambda: v)


def minimum(a, c: float) -> Node:
    """Elementwise min against a constant; ties send the gradient to ``a``."""
    a = _lift(a)
    return _unary(a, np.minimum(a.value, c), lambda: (a.value <= c).astype(np.float64))


def maximum(a, c: float) -> Node:
    """Elementwise max against a constant; ties send the gradient to ``a``."""
    a = _lift(a)
    return _unary(a, np.maximum(a.value, c), lambda: (a.value >= c).astype(np.float64))


_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div}
_UNARY = {"neg": neg, "abs": absolute, "square": square, "sqrt": sqrt, "log": log, "exp": exp}


def elementwise(op: str, a, b=None) -> Node:
    """Dispatch by name, e.g. ``elementwise("abs", x)`` or ``elementwise("mul", x, y)``."""
    if op in _BINARY:
        if b is None:
            raise ValueError(f"{op} needs two operands")
        return _BINARY[op](a, b)
    if op in _UNARY:
        if b is not None:
            raise ValueError(f"{op} takes one operand")
        return _UNARY[op](a)
    raise ValueError(f"unknown elementwise op {op!r}")


def _check_nonempty(a: Node) -> None:
    if a.size == 0:
        raise ValueError("reduction over an empty tensor")


def total(a) -> Node:
    a = _lift(a)
    _check_nonempty(a)
    out = Node(np.sum(a.value), (a,))

    def _bw(g):
        a._accumulate(np.full(a.shape, float(g)))

    out._backward = _bw
    return out


def mean(a) -> Node:
    a = _lift(a)
    _check_nonempty(a)
    n = a.size
    out = Node(np.sum(a.value) / n, (a,))

    def _bw(g):
        a._accumulate(np.full(a.shape, float(g) / n))

    out._backward = _bw
    return out


def _arg_reduce(a: Node, pick) -> Node:
    _check_nonempty(a)
    flat = a.value.reshape(-1)
    idx = int(pick(flat))  # numpy argmax/argmin return the first attaining index
    out = Node(flat[idx], (a,))

    def _bw(g):
        gr = np.zeros(a.size)
        gr[idx] = float(g)
        a._accumulate(gr)

    out._backward = _bw
    return out


def amax(a) -> Node:
    return _arg_reduce(_lift(a), np.argmax)


def amin(a) -> Node:
    return _arg_reduce(_lift(a), np.argmin)


_REDUCE = {"sum": total, "mean": mean, "max": amax, "min": amin}


def reduce(op: str, a) -> Node:
    if op not in _REDUCE:
        raise ValueError(f"unknown reduction {op!r}")
    return _REDUCE[op](a)


def matmul(a, b) -> Node:
    a, b = _lift(a), _lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    out = Node(a.value @ b.value, (a, b))

    def _bw(g):
        if a.requires_grad:
            a._accumulate(g @ b.value.T)
        if b.requires_grad:
            b._accumulate(a.value.T @ g)

    out._backward = _bw
    return out


def affine(x, w, b) -> Node:
    """``x @ w + b`` with ``b`` a length-``n`` vector added to every row."""
    x, w, b = _lift(x), _lift(w), _lift(b)
    if x.value.ndim != 2 or w.value.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"affine dimension mismatch: {x.shape} @ {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"bias shape {b.shape} does not match output width {w.shape[1]}")
    out = Node(x.value @ w.value + b.value, (x, w, b))

    def _bw(g):
        if x.requires_grad:
            x._accumulate(g @ w.value.T)
        if w.requires_grad:
            w._accumulate(x.value.T @ g)
        if b.requires_grad:
            b._accumulate(g.sum(axis=0))

    out._backward = _bw
    return out


def elu(a) -> Node:
    """x for x > 0, exp(x) - 1 otherwise; derivative at 0 taken as 1."""
    a = _lift(a)
    pos = a.value >= 0.0
    ex = np.exp(np.minimum(a.value, 0.0))
    v = np.where(pos, a.value, ex - 1.0)
    return _unary(a, v, lambda: np.where(pos, 1.0, ex))


def column(a, j: int) -> Node:
    """Column ``j`` of a 2-d node, as an ``(N, 1)`` node."""
    a = _lift(a)
    if a.value.ndim != 2:
        raise ValueError("column() needs a 2-d node")
    out = Node(a.value[:, j : j + 1].copy(), (a,))

    def _bw(g):
        full = np.zeros(a.shape)
        full[:, j : j + 1] = g
        a._accumulate(full)

    out._backward = _bw
    return out


def reshape(a, shape: tuple[int, ...]) -> Node:
    a = _lift(a)
    out = Node(a.value.reshape(shape), (a,))

    def _bw(g):
        a._accumulate(g.reshape(a.shape))

    out._backward = _bw
    return out


def detach(a) -> Node:
    """Same value, no gradient path."""
    return constant(_lift(a).value.copy())


def _topological(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in reversed(node.parents):
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node) -> None:
    """Populate ``grad`` on every node reachable from scalar ``root``."""
    if root.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    root._accumulate(np.ones(root.shape))
    if not root.requires_grad:
        return
    for node in reversed(_topological(root)):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def leaves(root: Node) -> Iterable[Node]:
    """Differentiable leaves reachable from ``root`` (used by tests)."""
    return [n for n in _topological(root) if not n.parents]
