"""Dense float64 tensors with define-by-run reverse-mode differentiation.

Every differentiable operation returns a new :class:`Tensor` that remembers
its parents and a backward rule. :func:`backward` walks that graph once in
reverse topological order and accumulates gradients into every
:class:`Parameter` (and any leaf created with ``requires_grad=True``).

Shapes follow numpy broadcasting; gradients of broadcast operands are summed
back down to the operand's shape. Rank is capped at 3 (batch, sequence,
feature).
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

MAX_RANK = 3
PHI_EPS = 1e-6
DIV_GUARD = 1e-30


class DimensionError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class DivisionGuardError(ZeroDivisionError):
    pass


def _check_rank(shape: tuple) -> None:
    if len(shape) > MAX_RANK:
        raise DimensionError(f"rank {len(shape)} exceeds maximum rank {MAX_RANK} (shape {shape})")


class Tensor:
    """A node on the tape.

    ``op`` names the operation that produced the tensor (``"leaf"`` for
    inputs), ``parents`` are the input nodes and ``backward_fn`` maps the
    upstream gradient to one gradient per parent.
    """

    __slots__ = ("data", "requires_grad", "grad", "op", "parents", "backward_fn")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf"):
        arr = np.array(data, dtype=np.float64)
        _check_rank(arr.shape)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite value produced by {op}")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = np.zeros_like(arr) if requires_grad else None
        self.op = op
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"expected a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op})"

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> Tensor:
        return transpose(self)


class Parameter(Tensor):
    """Trainable leaf with a unique ``name`` and a gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data: np.ndarray, op: str, parents: Sequence[Tensor], backward_fn: Callable) -> Tensor:
    out = Tensor(data, op=op)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# binary elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")
    return _node(a.data + b.data, "add", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")
    return _node(a.data - b.data, "sub", (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")
    return _node(a.data * b.data, "mul", (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    if b.size and np.min(np.abs(b.data)) < DIV_GUARD:
        raise DivisionGuardError(f"div: denominator magnitude below {DIV_GUARD:g}")
    out = a.data / b.data

    def backward(g):
        return (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape))

    return _node(out, "div", (a, b), backward)


def logaddexp(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "logaddexp")
    out = np.logaddexp(a.data, b.data)

    def backward(g):
        wa = np.exp(a.data - out)
        wb = np.exp(b.data - out)
        return _unbroadcast(g * wa, a.shape), _unbroadcast(g * wb, b.shape)

    return _node(out, "logaddexp", (a, b), backward)


# ---------------------------------------------------------------------------
# unary elementwise: forward and derivative live in a registry so tests can
# swap a rule out (negative controls for the gradient checker)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


UNARY_RULES: dict[str, tuple[Callable, Callable]] = {
    # derivative receives (x, y) with y = forward(x)
    "sigmoid": (_sigmoid, lambda x, y: y * (1.0 - y)),
    "tanh": (np.tanh, lambda x, y: 1.0 - y * y),
    "square": (np.square, lambda x, y: 2.0 * x),
    "abs": (np.abs, lambda x, y: np.sign(x)),
    "exp": (np.exp, lambda x, y: y),
    "softplus_phi": (lambda x: _softplus(x) + PHI_EPS, lambda x, y: _sigmoid(x)),
}


def _unary(name: str, x) -> Tensor:
    x = as_tensor(x)
    fwd, _ = UNARY_RULES[name]
    with np.errstate(over="ignore"):  # overflow surfaces as NonFiniteError in _node
        y = fwd(x.data)

    def backward(g):
        return (g * UNARY_RULES[name][1](x.data, y),)

    return _node(y, name, (x,), backward)


def sigmoid(x) -> Tensor:
    return _unary("sigmoid", x)


def tanh(x) -> Tensor:
    return _unary("tanh", x)


def square(x) -> Tensor:
    return _unary("square", x)


def abs(x) -> Tensor:  # noqa: A001 - mirrors numpy naming
    return _unary("abs", x)


def exp(x) -> Tensor:
    return _unary("exp", x)


def softplus_phi(x) -> Tensor:
    """``ln(1 + e^x) + 1e-6``, evaluated without overflow; always >= 1e-6."""
    return _unary("softplus_phi", x)


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data < 0):
        raise DimensionError("sqrt of negative value")
    y = np.sqrt(x.data)
    if np.min(y, initial=np.inf) < DIV_GUARD and x.requires_grad:
        raise DivisionGuardError("sqrt: derivative undefined at 0")
    return _node(y, "sqrt", (x,), lambda g: (g * 0.5 / y,))


def log(x) -> Tensor:
    x = as_tensor(x)
    if np.min(x.data, initial=np.inf) <= 0:
        raise DivisionGuardError("log of non-positive value")
    return _node(np.log(x.data), "log", (x,), lambda g: (g / x.data,))


def clamp_min(x, floor: float) -> Tensor:
    x = as_tensor(x)
    keep = x.data >= floor
    return _node(np.where(keep, x.data, floor), "clamp_min", (x,), lambda g: (g * keep,))


# ---------------------------------------------------------------------------
# reductions and structure


def _norm_axis(axis, ndim):
    if axis is None:
        return None
    return axis % ndim


def sum(x, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    axis = _norm_axis(axis, x.ndim)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _node(out, "sum", (x,), backward)


def mean(x, axis: int | None = None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax_axis(x, axis: int = -1) -> Tensor:
    """Max-shifted softmax; entries are nonnegative and sum to 1 along ``axis``."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _node(y, "softmax", (x,), backward)


def logsumexp(x, axis: int = -1, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    m = x.data.max(axis=axis, keepdims=True)
    s = np.log(np.exp(x.data - m).sum(axis=axis, keepdims=True)) + m
    w = np.exp(x.data - s)
    out = s if keepdims else np.squeeze(s, axis=axis)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * w,)

    return _node(out, "logsumexp", (x,), backward)


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, batched over a leading axis."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    if a.ndim == 3 and b.ndim == 3 and a.shape[0] != b.shape[0]:
        raise DimensionError(f"matmul: batch mismatch between {a.shape} and {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _node(out, "matmul", (a, b), backward)


def transpose(x) -> Tensor:
    """Swap the last two axes."""
    x = as_tensor(x)
    if x.ndim < 2:
        raise DimensionError(f"transpose needs rank >= 2, got {x.shape}")
    return _node(np.swapaxes(x.data, -1, -2), "transpose", (x,),
                 lambda g: (np.swapaxes(g, -1, -2),))


def reshape(x, shape: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    _check_rank(tuple(shape))
    return _node(x.data.reshape(shape), "reshape", (x,), lambda g: (g.reshape(x.shape),))


def concat(xs: Sequence, axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    try:
        out = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError:
        raise DimensionError(f"concat: incompatible shapes {[x.shape for x in xs]}") from None
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return _node(out, "concat", xs, lambda g: tuple(np.split(g, bounds, axis=axis)))


def embedding(table, ids) -> Tensor:
    """Row lookup ``table[ids]``; ``ids`` is an integer array of any rank <= 2."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding id out of range [0, {table.shape[0]})")

    def backward(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _node(table.data[ids], "embedding", (table,), backward)


# ---------------------------------------------------------------------------
# backward pass


def _topological(root: Tensor) -> list[Tensor]:
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
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.size != 1:
        raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topological(loss)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad += g
            continue
        for parent, pg in zip(node.parents, node.backward_fn(g)):
            if not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


def zero_grad(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()


def finite_difference_check(f: Callable[[], Tensor], p: Parameter, h: float = 1e-5,
                            indices: Iterable[int] | None = None) -> float:
    """Max relative error between backprop and central differences for ``p``.

    ``f`` rebuilds the scalar loss from the current parameter values. The
    error per entry is ``|a - n| / (|a| + |n| + 1e-12)``.
    """
    flat = p.data.reshape(-1)
    idx = np.arange(flat.size) if indices is None else np.asarray(list(indices), dtype=int)
    p.zero_grad()
    loss = f()
    backward(loss)
    analytic = p.grad.reshape(-1).copy()
    numeric = np.zeros_like(analytic)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        up = f().item()
        flat[i] = orig - h
        down = f().item()
        flat[i] = orig
        numeric[i] = (up - down) / (2.0 * h)
    if idx.size == 0:
        return 0.0
    a, n = analytic[idx], numeric[idx]
    return float(np.max(np.abs(a - n) / (np.abs(a) + np.abs(n) + 1e-12)))
