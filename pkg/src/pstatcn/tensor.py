"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy float64 array plus an optional gradient buffer. Every
operation records its parents and a closure that pushes the output gradient
back through the chain rule; the graph is rebuilt on every forward pass
(define-by-run). ``backward`` on a scalar root replays the closures in
reverse topological order.

Design constraints honored here:
  * 64-bit floats everywhere; forward evaluation is bitwise deterministic.
  * no implicit broadcasting except scalar-with-tensor; shape mismatches
    raise a ConfigurationError naming both shapes.
  * calling backward twice without zero_grad accumulates exactly twice the
    single-call gradient (intermediate grads are reset per call, leaf grads
    are not).
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

Array = np.ndarray


class Tensor:
    """One node of the differentiable computation graph."""

    __slots__ = ("data", "requires_grad", "_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self._grad: Array | None = None
        self._parents = _parents
        self._backward = None
        self._op = _op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    @property
    def grad(self) -> Array:
        """Accumulated gradient; zeros until backward reaches this node."""
        if self._grad is None:
            self._grad = np.zeros_like(self.data)
        return self._grad

    def zero_grad(self) -> None:
        self._grad = None

    def backward(self) -> None:
        """Populate d(self)/d(leaf) for every leaf reachable from self.

        The root must hold a single value. Leaf gradients accumulate across
        calls; gradients of intermediate nodes are reset at the start of each
        call so repeated backward passes stay exact multiples.
        """
        if self.data.size != 1:
            raise ValueError(f"backward root must be scalar, got shape {self.data.shape}")
        order = topological_order(self)
        # Each pass runs on fresh buffers; previously accumulated leaf grads
        # are added back afterwards so repeated calls sum bitwise-identical
        # per-pass totals (twice the calls, exactly twice the gradient).
        stashed = [(node, node._grad) for node in order if not node._parents and node._grad is not None]
        for node in order:
            node._grad = None
        self._grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node._grad is not None:
                node._backward(node._grad)
        for node, previous in stashed:
            if node._grad is None:
                node._grad = previous
            else:
                node._grad += previous

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    # Operator sugar; the module-level functions carry the real rules.
    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __neg__(self):
        return mul(self, Tensor(-1.0))


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _accumulate(node: Tensor, g: Array, owned: bool = False) -> None:
    """Add g into the node's gradient buffer.

    owned=True promises g is a fresh array no one else references, letting
    the first accumulation adopt it without a copy.
    """
    if node._grad is None:
        node._grad = g if owned else g.copy()
    else:
        node._grad += g


def topological_order(root: Tensor) -> list[Tensor]:
    """All ancestors of root, parents strictly before children (iterative DFS)."""
    order: list[Tensor] = []
    visited = {id(root)}
    stack = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        pushed = False
        for parent in parents:
            if id(parent) not in visited:
                visited.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                pushed = True
                break
        if not pushed:
            order.append(node)
            stack.pop()
    return order


def make_node(data: Array, parents: tuple[Tensor, ...], op: str, backward_fn) -> Tensor:
    """Assemble an op result; backward_fn(g) pushes the gradient to parents."""
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents), _parents=parents, _op=op)
    if out.requires_grad:
        out._backward = backward_fn
    return out


def _check_binary_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape == b.shape or a.size == 1 or b.size == 1:
        return
    raise ConfigurationError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(g: Array, shape: tuple[int, ...]) -> Array:
    # Only scalar-with-tensor broadcasting exists, so either shapes match or
    # the target held a single value.
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("add", a, b)

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _reduce_to(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(g, b.shape))

    return make_node(a.data + b.data, (a, b), "add", backward_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("sub", a, b)

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _reduce_to(g, a.shape))
        if b.requires_grad:
            _accumulate(b, _reduce_to(-g, b.shape), owned=True)

    return make_node(a.data - b.data, (a, b), "sub", backward_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_binary_shapes("mul", a, b)

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _reduce_to(g * b.data, a.shape), owned=True)
        if b.requires_grad:
            _accumulate(b, _reduce_to(g * a.data, b.shape), owned=True)

    return make_node(a.data * b.data, (a, b), "mul", backward_fn)


def relu(a: Tensor) -> Tensor:
    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g * (a.data > 0.0), owned=True)

    return make_node(np.maximum(a.data, 0.0), (a,), "relu", backward_fn)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g * out_data, owned=True)

    return make_node(out_data, (a,), "exp", backward_fn)


def sqrt(a: Tensor) -> Tensor:
    out_data = np.sqrt(a.data)

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g * (0.5 / out_data), owned=True)

    return make_node(out_data, (a,), "sqrt", backward_fn)


def matvec(w: Tensor, x: Tensor) -> Tensor:
    """y[i] = sum_j w[i, j] * x[j] for w [m, n] and x [n]."""
    if w.data.ndim != 2 or x.data.ndim != 1 or w.shape[1] != x.shape[0]:
        raise ConfigurationError(f"matvec: dimension mismatch {w.shape} vs {x.shape}")

    def backward_fn(g):
        if w.requires_grad:
            _accumulate(w, np.outer(g, x.data), owned=True)
        if x.requires_grad:
            _accumulate(x, w.data.T @ g, owned=True)

    return make_node(w.data @ x.data, (w, x), "matvec", backward_fn)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g.reshape(a.shape))

    return make_node(a.data.reshape(shape), (a,), "reshape", backward_fn)


def transpose_axes(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(int(i) for i in np.argsort(axes))

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, np.ascontiguousarray(g.transpose(inverse)), owned=True)

    return make_node(np.ascontiguousarray(a.data.transpose(axes)), (a,), "transpose", backward_fn)


def sum_all(a: Tensor) -> Tensor:
    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, np.full_like(a.data, g.item()), owned=True)

    return make_node(np.sum(a.data).reshape(()), (a,), "sum", backward_fn)


def mean_all(a: Tensor) -> Tensor:
    scale = 1.0 / a.data.size

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, np.full_like(a.data, g.item() * scale), owned=True)

    return make_node(np.mean(a.data).reshape(()), (a,), "mean", backward_fn)


def finite_diff_grad(f, x: Array, eps: float) -> Array:
    """Central-difference gradient of a scalar function of a flat array.

    The independent oracle used by every gradient check: evaluates
    (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps) per coordinate.
    """
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        up = x.copy()
        up.flat[i] += eps
        down = x.copy()
        down.flat[i] -= eps
        grad.flat[i] = (f(up) - f(down)) / (2.0 * eps)
    return grad
