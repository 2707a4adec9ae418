"""
Reverse-mode Gradient Tape

A small reverse-mode differentiation engine over numpy arrays. Every
elementary operation on a recorded `Var` appends a node holding its
vector-Jacobian products; `Tape.backward` walks the nodes in reverse
creation order (a reverse topological order) exactly once.

Values created without a tape are constants: operations on them compute
plain numpy results and record nothing, so the same model code serves the
fast forward path and the differentiated path.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np


class Tape:
    """Records operations on `Var` nodes for one backward pass"""

    def __init__(self):
        self._nodes: List["Var"] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def _record(self, node: "Var"):
        self._nodes.append(node)

    def variable(self, value) -> "Var":
        """Create a leaf whose gradient is returned by `backward`"""
        return Var(value, tape=self)

    def backward(self, output: "Var", seed=1.0,
                 release: bool = True) -> Dict["Var", np.ndarray]:
        """
        Run the reverse pass from `output`

        Args:
            output: recorded node to differentiate (normally a scalar)
            seed: adjoint of the output, broadcast to its shape
            release: drop the recorded graph afterwards

        Returns:
            Dict mapping every leaf created by `variable` to its gradient
        """
        if not self._nodes:
            raise ValueError("backward called on an empty tape")
        if output.tape is not self:
            raise ValueError("output was not recorded on this tape")

        grads: Dict[int, np.ndarray] = {
            id(output): np.broadcast_to(np.asarray(seed, dtype=np.float64),
                                        output.value.shape).copy()
        }
        leaves: Dict[Var, np.ndarray] = {}
        for node in reversed(self._nodes):
            grad = grads.pop(id(node), None)
            if not node.parents:
                leaves[node] = (grad if grad is not None
                                else np.zeros_like(node.value))
                continue
            if grad is None:
                continue
            for parent, vjp in node.parents:
                contribution = vjp(grad)
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + contribution
                else:
                    grads[key] = contribution

        for leaf, grad in leaves.items():
            leaf.grad = grad
        if release:
            self.reset()
        return leaves

    def reset(self):
        """Release every recorded node"""
        for node in self._nodes:
            node.parents = ()
        self._nodes = []


class Var:
    """Array value that optionally records the operations applied to it"""

    __array_priority__ = 100.0
    __array_ufunc__ = None

    def __init__(self, value, tape: Optional[Tape] = None,
                 parents: Tuple = ()):
        self.value = np.asarray(value, dtype=np.float64)
        self.tape = tape
        self.parents = parents
        self.grad: Optional[np.ndarray] = None
        if tape is not None:
            tape._record(self)

    def __repr__(self):
        recorded = "recorded" if self.tape is not None else "constant"
        return f"Var({self.value!r}, {recorded})"

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

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

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def lift(x) -> Var:
    """Wrap arrays and scalars as constant `Var`s"""
    return x if isinstance(x, Var) else Var(x)


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Var) else np.asarray(x, dtype=np.float64)


def _make(value, inputs: Sequence[Tuple[Var, Callable]]) -> Var:
    tape = None
    for var, _ in inputs:
        if var.tape is not None:
            if tape is not None and var.tape is not tape:
                raise ValueError("cannot combine values from different tapes")
            tape = var.tape
    if tape is None:
        return Var(value)
    parents = tuple((var, vjp) for var, vjp in inputs if var.tape is not None)
    return Var(value, tape=tape, parents=parents)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, size in enumerate(shape)
                 if size == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# Arithmetic

def add(a, b) -> Var:
    a, b = lift(a), lift(b)
    return _make(a.value + b.value, [
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(g, b.shape)),
    ])


def sub(a, b) -> Var:
    a, b = lift(a), lift(b)
    return _make(a.value - b.value, [
        (a, lambda g: _unbroadcast(g, a.shape)),
        (b, lambda g: _unbroadcast(-g, b.shape)),
    ])


def mul(a, b) -> Var:
    a, b = lift(a), lift(b)
    return _make(a.value * b.value, [
        (a, lambda g: _unbroadcast(g * b.value, a.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.shape)),
    ])


def div(a, b) -> Var:
    a, b = lift(a), lift(b)
    out = a.value / b.value
    return _make(out, [
        (a, lambda g: _unbroadcast(g / b.value, a.shape)),
        (b, lambda g: _unbroadcast(-g * out / b.value, b.shape)),
    ])


def neg(a) -> Var:
    a = lift(a)
    return _make(-a.value, [(a, lambda g: -g)])


def square(a) -> Var:
    a = lift(a)
    return _make(a.value ** 2, [(a, lambda g: 2.0 * g * a.value)])


def matmul(a, b) -> Var:
    """Product of a (n, k) and a (k, m) array"""
    a, b = lift(a), lift(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    return _make(a.value @ b.value, [
        (a, lambda g: g @ b.value.T),
        (b, lambda g: a.value.T @ g),
    ])


# Elementwise functions

def exp(a) -> Var:
    a = lift(a)
    out = np.exp(a.value)
    return _make(out, [(a, lambda g: g * out)])


def log(a) -> Var:
    a = lift(a)
    with np.errstate(divide="ignore"):
        out = np.log(a.value)
    return _make(out, [(a, lambda g: g / a.value)])


def sqrt(a) -> Var:
    a = lift(a)
    out = np.sqrt(a.value)
    return _make(out, [(a, lambda g: 0.5 * g / out)])


def tanh(a) -> Var:
    a = lift(a)
    out = np.tanh(a.value)
    return _make(out, [(a, lambda g: g * (1.0 - out ** 2))])


def relu(a) -> Var:
    a = lift(a)
    mask = a.value > 0
    return _make(np.where(mask, a.value, 0.0), [(a, lambda g: g * mask)])


def softplus(a) -> Var:
    a = lift(a)
    out = np.logaddexp(0.0, a.value)
    sigmoid = np.exp(a.value - out)
    return _make(out, [(a, lambda g: g * sigmoid)])


def abs_(a) -> Var:
    a = lift(a)
    return _make(np.abs(a.value), [(a, lambda g: g * np.sign(a.value))])


def sin(a) -> Var:
    a = lift(a)
    return _make(np.sin(a.value), [(a, lambda g: g * np.cos(a.value))])


def cos(a) -> Var:
    a = lift(a)
    return _make(np.cos(a.value), [(a, lambda g: -g * np.sin(a.value))])


def atan2(y, x) -> Var:
    y, x = lift(y), lift(x)
    r2 = y.value ** 2 + x.value ** 2
    return _make(np.arctan2(y.value, x.value), [
        (y, lambda g: _unbroadcast(g * x.value / r2, y.shape)),
        (x, lambda g: _unbroadcast(-g * y.value / r2, x.shape)),
    ])


def wrap_angle(a) -> Var:
    """Wrap to (-pi, pi]; derivative is one away from the cut"""
    a = lift(a)
    in_range = (a.value > -np.pi) & (a.value <= np.pi)
    out = np.where(in_range, a.value, np.pi - np.mod(np.pi - a.value, 2.0 * np.pi))
    return _make(out, [(a, lambda g: g)])


def clip(a, lower, upper) -> Var:
    a = lift(a)
    inside = (a.value >= lower) & (a.value <= upper)
    return _make(np.clip(a.value, lower, upper), [(a, lambda g: g * inside)])


def where(mask, a, b) -> Var:
    """Select a where mask holds, else b; mask is constant"""
    a, b = lift(a), lift(b)
    mask = np.asarray(mask, dtype=bool)
    return _make(np.where(mask, a.value, b.value), [
        (a, lambda g: _unbroadcast(np.where(mask, g, 0.0), a.shape)),
        (b, lambda g: _unbroadcast(np.where(mask, 0.0, g), b.shape)),
    ])


# Reductions and shape manipulation

def sum_(a, axis=None, keepdims=False) -> Var:
    a = lift(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, a.shape).copy()

    return _make(out, [(a, vjp)])


def mean(a, axis=None, keepdims=False) -> Var:
    a = lift(a)
    count = a.value.size if axis is None else a.shape[axis]
    return sum_(a, axis=axis, keepdims=keepdims) / float(count)


def logsumexp(a, axis=-1, keepdims=False) -> Var:
    """log(sum(exp(a))) along an axis; all -inf slices give -inf"""
    a = lift(a)
    m = np.max(a.value, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out_keep = m + np.log(np.sum(np.exp(a.value - m), axis=axis, keepdims=True))

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        finite = np.isfinite(out_keep)
        weights = np.where(finite, np.exp(a.value - np.where(finite, out_keep, 0.0)), 0.0)
        return g * weights

    out = out_keep if keepdims else np.squeeze(out_keep, axis=axis)
    return _make(out, [(a, vjp)])


def log_softmax(a, axis=-1) -> Var:
    return sub(a, logsumexp(a, axis=axis, keepdims=True))


def maximum(a, floor: float) -> Var:
    """Elementwise max against a constant floor"""
    a = lift(a)
    above = a.value > floor
    return _make(np.where(above, a.value, floor), [(a, lambda g: g * above)])


def getitem(a, index) -> Var:
    a = lift(a)

    def vjp(g):
        out = np.zeros_like(a.value)
        np.add.at(out, index, g)
        return out

    return _make(a.value[index], [(a, vjp)])


def reshape(a, shape) -> Var:
    a = lift(a)
    return _make(a.value.reshape(shape), [(a, lambda g: g.reshape(a.shape))])


def expand_dims(a, axis) -> Var:
    a = lift(a)
    return _make(np.expand_dims(a.value, axis), [(a, lambda g: g.reshape(a.shape))])


def stack(items: Sequence, axis: int = -1) -> Var:
    items = [lift(x) for x in items]
    out = np.stack([x.value for x in items], axis=axis)
    inputs = []
    for i, item in enumerate(items):
        inputs.append((item, lambda g, i=i: np.take(g, i, axis=axis)))
    return _make(out, inputs)


def concatenate(items: Sequence, axis: int = -1) -> Var:
    items = [lift(x) for x in items]
    out = np.concatenate([x.value for x in items], axis=axis)
    bounds = np.cumsum([0] + [x.shape[axis] for x in items])
    inputs = []
    for i, item in enumerate(items):
        idx = np.arange(bounds[i], bounds[i + 1])
        inputs.append((item, lambda g, idx=idx: np.take(g, idx, axis=axis)))
    return _make(out, inputs)


def custom(value, inputs: Sequence[Tuple[Var, Callable]]) -> Var:
    """Record an operation whose vector-Jacobian products are supplied"""
    return _make(value, [(lift(v), vjp) for v, vjp in inputs])
