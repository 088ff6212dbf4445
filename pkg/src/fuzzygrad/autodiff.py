"""Tape-based reverse-mode automatic differentiation over float64 arrays.

Every operation on a tracked :class:`Value` appends a :class:`Node` to the
active :class:`Graph`.  Nodes carry a monotonically increasing sequence
number, so sorting reachable nodes by that number yields a topological
order without an explicit search.

Graphs are retained after :func:`backward`; calling it again from another
root of the same graph accumulates into the leaves, the way a second
``backward(retain_graph=True)`` would.

    >>> w = make_value([2.0], requires_grad=True)
    >>> b = make_value([1.0], requires_grad=True)
    >>> y = w * 3.0 + b
    >>> backward(y)
    >>> grad_of(w), grad_of(b)
    (array([3.]), array([1.]))
"""

from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, GraphError, NonFiniteError, ShapeError

__all__ = [
    "Value",
    "Node",
    "Graph",
    "Mask",
    "make_value",
    "constant",
    "as_value",
    "binary_op",
    "unary_op",
    "compare_mask",
    "where_select",
    "reduce",
    "stack_rows",
    "unbind_rows",
    "repeat",
    "backward",
    "grad_of",
    "zero_grads",
    "current_graph",
    "scoped_graph",
]

_seq = itertools.count()
_local = threading.local()

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Node:
    """One recorded operation: output data, parents and the vjp rule."""

    __slots__ = ("op", "parents", "backward_fn", "data", "seq", "graph")

    def __init__(self, op: str, parents: tuple, backward_fn: BackwardFn,
                 data: np.ndarray, graph: "Graph"):
        self.op = op
        self.parents = parents
        self.backward_fn = backward_fn
        self.data = data
        self.seq = next(_seq)
        self.graph = graph

    def __repr__(self) -> str:
        return f"Node({self.op}, seq={self.seq})"


class Graph:
    """Ordered record of operations.

    Use as a context manager to scope a computation; nodes created inside
    the ``with`` block land here instead of the thread's default graph.
    The default graph does not keep a node list, so unscoped computations
    are reclaimed as soon as their Values are dropped.
    """

    def __init__(self, keep_nodes: bool = True):
        self.nodes: list[Node] = []
        self.retained = True
        self.keep_nodes = keep_nodes

    def record(self, node: Node) -> None:
        if not self.retained:
            raise GraphError("cannot record into a freed graph")
        if self.keep_nodes:
            self.nodes.append(node)

    def free(self) -> None:
        """Drop every recorded node; later backward passes through it fail."""
        for node in self.nodes:
            node.backward_fn = None
            node.parents = ()
        self.nodes.clear()
        self.retained = False

    def __len__(self) -> int:
        return len(self.nodes)

    def __enter__(self) -> "Graph":
        stack = _graph_stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _graph_stack().pop()


def _graph_stack() -> list[Graph]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = [Graph(keep_nodes=False)]
    return stack


def current_graph() -> Graph:
    """The graph new nodes are recorded into on this thread."""
    return _graph_stack()[-1]


@contextmanager
def scoped_graph():
    """Record into a fresh graph and free it on exit."""
    g = Graph()
    with g:
        try:
            yield g
        finally:
            g.free()


class Mask:
    """Boolean array produced by comparisons.  Never carries gradient."""

    __slots__ = ("data",)

    def __init__(self, data):
        self.data = np.asarray(data, dtype=bool)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def __and__(self, other: "Mask") -> "Mask":
        return Mask(self.data & _mask_data(other))

    def __or__(self, other: "Mask") -> "Mask":
        return Mask(self.data | _mask_data(other))

    def __invert__(self) -> "Mask":
        return Mask(~self.data)

    def any(self) -> bool:
        return bool(self.data.any())

    def __repr__(self) -> str:
        return f"Mask({self.data.tolist()})"


def _mask_data(m) -> np.ndarray:
    return m.data if isinstance(m, Mask) else np.asarray(m, dtype=bool)


class Value:
    """A float64 array node in a computation graph.

    Leaves created with ``requires_grad=True`` accumulate gradients in
    :attr:`grad`; results of operations on tracked values carry a
    :attr:`node` pointing at the operation that produced them.
    """

    __slots__ = ("data", "requires_grad", "grad", "node", "__weakref__")
    __array_priority__ = 100

    def __init__(self, data: np.ndarray, requires_grad: bool = False,
                 node: Node | None = None):
        self.data = data
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node = node

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def tracked(self) -> bool:
        return self.requires_grad or self.node is not None

    @property
    def is_leaf(self) -> bool:
        return self.node is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"expected a single-element Value, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> "Value":
        return Value(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        extra = ", requires_grad=True" if self.requires_grad and self.is_leaf else ""
        op = f", op={self.node.op}" if self.node is not None else ""
        return f"Value({self.data!r}{extra}{op})"

    # arithmetic
    def __add__(self, other): return binary_op("add", self, other)
    def __radd__(self, other): return binary_op("add", other, self)
    def __sub__(self, other): return binary_op("sub", self, other)
    def __rsub__(self, other): return binary_op("sub", other, self)
    def __mul__(self, other): return binary_op("mul", self, other)
    def __rmul__(self, other): return binary_op("mul", other, self)
    def __truediv__(self, other): return binary_op("div", self, other)
    def __rtruediv__(self, other): return binary_op("div", other, self)
    def __neg__(self): return unary_op("neg", self)

    # comparisons yield detached masks
    def __lt__(self, other): return compare_mask("lt", self, other)
    def __le__(self, other): return compare_mask("le", self, other)
    def __gt__(self, other): return compare_mask("gt", self, other)
    def __ge__(self, other): return compare_mask("ge", self, other)

    __hash__ = object.__hash__

    def __getitem__(self, index) -> "Value":
        return _index(self, index)

    def sum(self) -> "Value":
        return reduce("sum", self)

    def mean(self) -> "Value":
        return reduce("mean", self)


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        bad = tuple(int(i) for i in np.argwhere(~np.isfinite(arr))[0])
        raise NonFiniteError(f"{what}: non-finite entry at index {bad}")


def make_value(data, requires_grad: bool = False) -> Value:
    """Create a leaf.  Data is copied to float64 and must be finite, non-empty."""
    arr = np.array(data, dtype=np.float64)
    if arr.size == 0:
        raise ShapeError("cannot make a Value from empty data")
    if arr.ndim > 2:
        raise ShapeError(f"at most 2-D data supported, got {arr.ndim}-D")
    _check_finite(arr, "make_value")
    return Value(arr, requires_grad=requires_grad)


def constant(data) -> Value:
    """Untracked leaf; skips validation (used for internal literals)."""
    return Value(np.asarray(data, dtype=np.float64))


def as_value(x) -> Value:
    return x if isinstance(x, Value) else constant(x)


def _result(op: str, data: np.ndarray, parents: tuple, backward_fn: BackwardFn) -> Value:
    if not any(p.tracked for p in parents):
        return Value(data)
    graph = current_graph()
    node = Node(op, parents, backward_fn, data, graph)
    graph.record(node)
    return Value(data, requires_grad=True, node=node)


def _broadcast_shape(op: str, a: Value, b: Value) -> tuple:
    if a.shape == b.shape:
        return a.shape
    if a.size == 1 and b.size == 1:
        return a.shape if a.data.ndim >= b.data.ndim else b.shape
    if a.size == 1:
        return b.shape
    if b.size == 1:
        return a.shape
    raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum()).reshape(shape)


def _reshape_scalar(arr: np.ndarray, shape: tuple, out_shape: tuple) -> np.ndarray:
    # size-1 operands of higher rank than the output must not inflate it
    return arr.reshape(()) if arr.size == 1 and shape != out_shape else arr


def binary_op(kind: str, a, b) -> Value:
    """Elementwise add/sub/mul/div/minimum/maximum with scalar broadcast.

    minimum and maximum route the whole gradient to the selected operand;
    exact ties go to the first operand.
    """
    a, b = as_value(a), as_value(b)
    out_shape = _broadcast_shape(kind, a, b)
    x = _reshape_scalar(a.data, a.shape, out_shape)
    y = _reshape_scalar(b.data, b.shape, out_shape)
    sa, sb = a.shape, b.shape

    if kind == "add":
        data = x + y
        fn = lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb))
    elif kind == "sub":
        data = x - y
        fn = lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb))
    elif kind == "mul":
        data = x * y
        fn = lambda g: (_unbroadcast(g * y, sa), _unbroadcast(g * x, sb))
    elif kind == "div":
        with np.errstate(divide="ignore", invalid="ignore"):
            data = x / y
        def fn(g):
            with np.errstate(divide="ignore", invalid="ignore"):
                return (_unbroadcast(g / y, sa), _unbroadcast(-g * x / (y * y), sb))
    elif kind in ("minimum", "maximum"):
        first = (x <= y) if kind == "minimum" else (x >= y)
        first = np.broadcast_to(first, out_shape)
        data = np.where(first, x, y)
        fn = lambda g: (_unbroadcast(np.where(first, g, 0.0), sa),
                        _unbroadcast(np.where(first, 0.0, g), sb))
    else:
        raise ValueError(f"unknown binary op {kind!r}")
    data = np.broadcast_to(data, out_shape).astype(np.float64, copy=False)
    return _result(kind, data, (a, b), fn)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def unary_op(kind: str, a) -> Value:
    """Elementwise neg/square/sqrt/exp/abs/log/softplus/sigmoid."""
    a = as_value(a)
    x = a.data
    if kind == "neg":
        data = -x
        fn = lambda g: (-g,)
    elif kind == "square":
        data = x * x
        fn = lambda g: (2.0 * x * g,)
    elif kind == "sqrt":
        _require_domain(kind, x, x >= 0)
        data = np.sqrt(x)
        # derivative at 0 is infinite; surfaces as non-finite if reached
        def fn(g):
            with np.errstate(divide="ignore", invalid="ignore"):
                return (g / (2.0 * data),)
    elif kind == "exp":
        data = np.exp(x)
        fn = lambda g: (g * data,)
    elif kind == "abs":
        data = np.abs(x)
        fn = lambda g: (g * np.sign(x),)
    elif kind == "log":
        _require_domain(kind, x, x > 0)
        data = np.log(x)
        fn = lambda g: (g / x,)
    elif kind == "softplus":
        data = np.logaddexp(0.0, x)
        fn = lambda g: (g * _sigmoid(x),)
    elif kind == "sigmoid":
        data = _sigmoid(x)
        fn = lambda g: (g * data * (1.0 - data),)
    else:
        raise ValueError(f"unknown unary op {kind!r}")
    return _result(kind, data, (a,), fn)


def _require_domain(kind: str, x: np.ndarray, ok: np.ndarray) -> None:
    if not np.all(ok):
        idx = tuple(int(i) for i in np.argwhere(~ok)[0])
        raise DomainError(f"{kind}: argument {float(x[idx])} outside domain at index {idx}")


_COMPARE = {"lt": np.less, "le": np.less_equal, "gt": np.greater, "ge": np.greater_equal}


def compare_mask(kind: str, a, b) -> Mask:
    a, b = as_value(a), as_value(b)
    out_shape = _broadcast_shape(kind, a, b)
    x = _reshape_scalar(a.data, a.shape, out_shape)
    y = _reshape_scalar(b.data, b.shape, out_shape)
    try:
        fn = _COMPARE[kind]
    except KeyError:
        raise ValueError(f"unknown comparison {kind!r}") from None
    return Mask(np.broadcast_to(fn(x, y), out_shape))


def where_select(mask, on_true, on_false) -> Value:
    """Pick ``on_true`` where the mask holds, else ``on_false``.

    Each element's gradient goes to the branch that supplied it.
    """
    m = _mask_data(mask)
    t, f = as_value(on_true), as_value(on_false)
    for v in (t, f):
        if v.size != 1 and v.shape != m.shape:
            raise ShapeError(f"where: branch shape {v.shape} vs mask {m.shape}")
    st, sf = t.shape, f.shape
    data = np.where(m, _reshape_scalar(t.data, st, m.shape), _reshape_scalar(f.data, sf, m.shape))
    fn = lambda g: (_unbroadcast(np.where(m, g, 0.0), st), _unbroadcast(np.where(m, 0.0, g), sf))
    return _result("where", data.astype(np.float64, copy=False), (t, f), fn)


def reduce(kind: str, a) -> Value:
    """Sum or mean of all entries, as a 0-d Value."""
    a = as_value(a)
    if a.size == 0:
        raise ShapeError("reduce over empty Value")
    shape, n = a.shape, a.size
    if kind == "sum":
        data = np.asarray(a.data.sum())
        fn = lambda g: (np.full(shape, float(g)),)
    elif kind == "mean":
        data = np.asarray(a.data.sum() / n)
        fn = lambda g: (np.full(shape, float(g) / n),)
    else:
        raise ValueError(f"unknown reduction {kind!r}")
    return _result(kind, data, (a,), fn)


def stack_rows(parts: Sequence) -> Value:
    """Stack equally-shaped Values along a new leading axis.

    Scalars stack into a vector, vectors into a matrix.
    """
    parts = [as_value(p) for p in parts]
    if not parts:
        raise ShapeError("stack of zero parts")
    scalar = all(p.size == 1 and p.data.ndim <= 1 for p in parts)
    if scalar:
        data = np.array([p.data.reshape(()) for p in parts], dtype=np.float64)
        shapes = [p.shape for p in parts]
        fn = lambda g: tuple(g[i].reshape(s) for i, s in enumerate(shapes))
    else:
        shape = parts[0].shape
        if any(p.shape != shape for p in parts) or len(shape) != 1:
            raise ShapeError(f"ragged stack: {[p.shape for p in parts]}")
        data = np.stack([p.data for p in parts])
        fn = lambda g: tuple(g[i] for i in range(len(parts)))
    return _result("stack", data, tuple(parts), fn)


def unbind_rows(a) -> list[Value]:
    """Split a matrix into its rows; each row is differentiable on its own."""
    a = as_value(a)
    if a.data.ndim != 2:
        raise ShapeError(f"unbind needs a 2-D Value, got shape {a.shape}")
    return [_index(a, i) for i in range(a.shape[0])]


def _index(a: Value, index) -> Value:
    shape = a.shape
    data = np.array(a.data[index], dtype=np.float64)

    basic = isinstance(index, (int, np.integer, slice))

    def fn(g):
        full = np.zeros(shape)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _result("index", data, (a,), fn)


def repeat(a, n: int, axis: int) -> Value:
    """Explicit expansion of a vector to a matrix.

    ``axis=0`` stacks ``n`` copies of ``a`` as rows, ``axis=1`` makes each
    entry of ``a`` a constant row of length ``n``.
    """
    a = as_value(a)
    if a.data.ndim != 1:
        raise ShapeError(f"repeat needs a 1-D Value, got shape {a.shape}")
    if axis == 0:
        data = np.tile(a.data, (n, 1))
        fn = lambda g: (g.sum(axis=0),)
    elif axis == 1:
        data = np.repeat(a.data[:, None], n, axis=1)
        fn = lambda g: (g.sum(axis=1),)
    else:
        raise ValueError("axis must be 0 or 1")
    return _result("repeat", data, (a,), fn)


def backward(root: Value) -> None:
    """Accumulate d(root)/d(leaf) into every reachable ``requires_grad`` leaf."""
    if not isinstance(root, Value) or not root.tracked:
        raise GraphError("backward root is not tracked")
    if root.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    seed = np.ones_like(root.data)
    if root.node is None:
        _accumulate_leaf(root, seed)
        return

    nodes = _reachable(root.node)
    # construction order, so the first failure names the producing op
    for node in reversed(nodes):
        if node.backward_fn is None:
            raise GraphError(f"graph containing {node.op} was freed")
        _check_finite(node.data, f"forward value of {node.op}")

    grads: dict[int, np.ndarray] = {root.node.seq: seed}
    for node in nodes:
        g = grads.pop(node.seq, None)
        if g is None:
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.tracked:
                continue
            if parent.node is not None:
                key = parent.node.seq
                grads[key] = grads[key] + pg if key in grads else pg
            else:
                _accumulate_leaf(parent, pg)


def _reachable(start: Node) -> list[Node]:
    seen: dict[int, Node] = {}
    todo = [start]
    while todo:
        node = todo.pop()
        if node.seq in seen:
            continue
        seen[node.seq] = node
        for p in node.parents:
            if p.node is not None and p.node.seq not in seen:
                todo.append(p.node)
    return [seen[k] for k in sorted(seen, reverse=True)]


def _accumulate_leaf(leaf: Value, g: np.ndarray) -> None:
    if not leaf.requires_grad:
        return
    g = np.asarray(g, dtype=np.float64).reshape(leaf.shape)
    _check_finite(g, "gradient")
    if leaf.grad is None:
        leaf.grad = g.copy()
    else:
        leaf.grad = leaf.grad + g


def grad_of(leaf: Value) -> np.ndarray:
    """Current gradient accumulator of a leaf (zeros before any backward)."""
    if not leaf.requires_grad or not leaf.is_leaf:
        raise GraphError("grad_of needs a leaf created with requires_grad=True")
    return np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy()


def zero_grads(leaves: Iterable[Value]) -> None:
    for leaf in leaves:
        if not leaf.requires_grad:
            raise GraphError("zero_grads on an untracked Value")
        leaf.grad = None
