"""
Reverse-mode differentiation over numpy arrays

A ``Var`` records the value of one primitive and, for each input that needs a
gradient, a vector-Jacobian product (VJP). ``grad`` walks the recorded tape
backwards.

Every VJP is itself written with the primitives of this module. When
``grad(..., create_graph=True)`` is used, the backward sweep is therefore
recorded like any forward computation, and the returned input gradient is a
``Var`` that can be differentiated again. This is how the training loop gets
parameter gradients of losses that consume ``x -> grad_x psi(x)``: the first
sweep unrolls the gradient program, the second differentiates it.

Primitives: affine maps (``matmul``, ``add`` with broadcasting), pairwise max
and sort, softplus, rectifier, rectify-square, squared norms and sums, and
elementwise scalar combinations. Piecewise primitives differentiate through a
constant selection mask, so repeated evaluation is bitwise reproducible.

Tie rule: when the two entries of a pair are equal, the lower index wins and
receives the whole subgradient.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ShapeError

Vjp = Callable[["Var"], "Var"]
Operand = Union["Var", float, int, np.ndarray]

_state = threading.local()


def _recording() -> bool:
    return getattr(_state, "record", True)


@contextmanager
def recording(enabled: bool) -> Iterator[None]:
    """Enable or disable tape recording for the current thread"""
    previous = _recording()
    _state.record = enabled
    try:
        yield
    finally:
        _state.record = previous


def no_grad():
    """Evaluate without recording a tape"""
    return recording(False)


class Var:
    """A value on the tape"""

    __slots__ = ("value", "parents", "requires_grad")

    def __init__(
        self,
        value,
        parents: Sequence[Tuple["Var", Vjp]] = (),
        requires_grad: bool = False,
    ):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self.requires_grad = requires_grad or bool(self.parents)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Var(shape={self.shape}{flag})"

    # Operator sugar; the right operand may be a python number or an array
    def __add__(self, other: Operand) -> "Var":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Var":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Var":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Var":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Var":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Var":
        return mul(other, self)

    def __neg__(self) -> "Var":
        return neg(self)

    def __matmul__(self, other: "Var") -> "Var":
        return matmul(self, other)


def const(value) -> Var:
    """A value that never receives a gradient"""
    return Var(value)


def variable(value) -> Var:
    """A leaf that receives a gradient"""
    return Var(np.array(value, dtype=np.float64), requires_grad=True)


def lift(x: Operand) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _make(value: np.ndarray, parents: Sequence[Tuple[Var, Vjp]]) -> Var:
    if not _recording():
        return Var(value)
    return Var(value, [(p, vjp) for p, vjp in parents if p.requires_grad])


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# Structural primitives -------------------------------------------------------

def sum_to(a: Var, shape: Tuple[int, ...]) -> Var:
    """Sum out broadcast axes so the result has ``shape``"""
    shape = tuple(shape)
    if a.shape == shape:
        return a
    return _make(_unbroadcast(a.value, shape), [(a, lambda g: broadcast_to(g, a.shape))])


def broadcast_to(a: Var, shape: Tuple[int, ...]) -> Var:
    shape = tuple(shape)
    if a.shape == shape:
        return a
    value = np.broadcast_to(a.value, shape).copy()
    return _make(value, [(a, lambda g: sum_to(g, a.shape))])


def row_sum(a: Var) -> Var:
    """Sum over the last axis, keeping it with length one"""
    return sum_to(a, a.shape[:-1] + (1,))


def total(a: Var) -> Var:
    """Sum of every entry, as a 0-d value"""
    return sum_to(a, ())


def transpose(a: Var) -> Var:
    return _make(a.value.T.copy(), [(a, transpose)])


def take(a: Var, index: np.ndarray) -> Var:
    """Select entries of the last axis"""
    size = a.shape[-1]
    return _make(a.value[..., index], [(a, lambda g: scatter(g, index, size))])


def scatter(a: Var, index: np.ndarray, size: int) -> Var:
    """Place the last axis of ``a`` at positions ``index`` of a zero array of width ``size``"""
    value = np.zeros(a.shape[:-1] + (size,))
    value[..., index] = a.value
    return _make(value, [(a, lambda g: take(g, index))])


# Arithmetic --------------------------------------------------------------------

def add(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return _make(
        a.value + b.value,
        [(a, lambda g: sum_to(g, a.shape)), (b, lambda g: sum_to(g, b.shape))],
    )


def sub(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return _make(
        a.value - b.value,
        [(a, lambda g: sum_to(g, a.shape)), (b, lambda g: sum_to(neg(g), b.shape))],
    )


def neg(a: Var) -> Var:
    return _make(-a.value, [(a, neg)])


def mul(a: Operand, b: Operand) -> Var:
    a, b = lift(a), lift(b)
    return _make(
        a.value * b.value,
        [(a, lambda g: sum_to(mul(g, b), a.shape)), (b, lambda g: sum_to(mul(g, a), b.shape))],
    )


def matmul(a: Var, b: Var) -> Var:
    """Product of two 2-D arrays"""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"Cannot multiply shapes {a.shape} and {b.shape}")
    return _make(
        a.value @ b.value,
        [(a, lambda g: matmul(g, transpose(b))), (b, lambda g: matmul(transpose(a), g))],
    )


def square(a: Var) -> Var:
    return mul(a, a)


def squared_norm(a: Var) -> Var:
    """Row-wise squared Euclidean norm, shape (..., 1)"""
    return row_sum(square(a))


def exp(a: Var) -> Var:
    out_value = np.exp(a.value)
    holder: List[Var] = []

    def vjp(g: Var) -> Var:
        return mul(g, holder[0])

    out = _make(out_value, [(a, vjp)])
    holder.append(out)
    return out


def absolute(a: Var) -> Var:
    sign = const(np.sign(a.value))
    return _make(np.abs(a.value), [(a, lambda g: mul(g, sign))])


# Activations -----------------------------------------------------------------

def sigmoid(a: Var) -> Var:
    out_value = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    holder: List[Var] = []

    def vjp(g: Var) -> Var:
        s = holder[0]
        return mul(g, mul(s, sub(1.0, s)))

    out = _make(out_value, [(a, vjp)])
    holder.append(out)
    return out


def softplus(a: Var, beta: float = 1.0) -> Var:
    """(1/beta) log(1 + exp(beta t)), evaluated as max(t,0) + log1p(exp(-|beta t|))/beta"""
    bt = beta * a.value
    value = np.maximum(a.value, 0.0) + np.log1p(np.exp(-np.abs(bt))) / beta
    return _make(value, [(a, lambda g: mul(g, sigmoid(mul(a, beta))))])


def relu(a: Var) -> Var:
    mask = const((a.value > 0).astype(np.float64))
    return _make(np.maximum(a.value, 0.0), [(a, lambda g: mul(g, mask))])


def rectify_square(a: Var) -> Var:
    """max(t, 0)^2, a continuously differentiable primitive with derivative 2 max(t, 0)"""
    r = np.maximum(a.value, 0.0)
    return _make(r * r, [(a, lambda g: mul(g, mul(relu(a), 2.0)))])


def _pair_indices(width: int) -> Tuple[np.ndarray, np.ndarray]:
    if width % 2:
        raise ShapeError(f"Pairing activations need an even width, got {width}")
    return np.arange(0, width, 2), np.arange(1, width, 2)


def pair_mask(a: Var) -> np.ndarray:
    """1.0 where the even entry of a pair wins (ties included), else 0.0"""
    even, odd = _pair_indices(a.shape[-1])
    return (a.value[..., even] >= a.value[..., odd]).astype(np.float64)


def pairwise_max(a: Var) -> Var:
    """max(v[2j], v[2j+1]) for each adjacent pair; halves the last axis"""
    even, odd = _pair_indices(a.shape[-1])
    m = pair_mask(a)
    return add(mul(take(a, even), const(m)), mul(take(a, odd), const(1.0 - m)))


def sortpool(a: Var) -> Var:
    """Replace each adjacent pair by (max, min); keeps the width"""
    width = a.shape[-1]
    even, odd = _pair_indices(width)
    m = const(pair_mask(a))
    not_m = const(1.0 - m.value)
    lo, hi = take(a, even), take(a, odd)
    top = add(mul(lo, m), mul(hi, not_m))
    bottom = add(mul(lo, not_m), mul(hi, m))
    return add(scatter(top, even, width), scatter(bottom, odd, width))


# Backward sweep --------------------------------------------------------------

def _topological_order(output: Var) -> List[Var]:
    order: List[Var] = []
    seen = set()
    stack: List[Tuple[Var, bool]] = [(output, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in reversed(node.parents):
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def grad(
    output: Var,
    inputs: Sequence[Var],
    seed: Optional[Var] = None,
    create_graph: bool = False,
) -> List[Var]:
    """
    Vector-Jacobian product of ``output`` with respect to ``inputs``

    Args:
        output: Value to differentiate
        inputs: Vars whose cotangents are returned
        seed: Output cotangent (defaults to ones, i.e. gradient of the sum)
        create_graph: Record the backward sweep so the result can be
            differentiated again

    Returns:
        One Var per input (zeros for inputs the output does not depend on)
    """
    order = _topological_order(output)
    wanted = {id(v) for v in inputs}

    # Only propagate into nodes that lead to a requested input
    relevant = set()
    for node in order:
        if id(node) in wanted or any(id(p) in relevant for p, _ in node.parents):
            relevant.add(id(node))

    cotangents: Dict[int, Var] = {}
    with recording(create_graph):
        cotangents[id(output)] = seed if seed is not None else Var(np.ones_like(output.value))
        for node in reversed(order):
            g = cotangents.get(id(node))
            if g is None or not node.parents:
                continue
            if id(node) not in wanted:
                del cotangents[id(node)]
            for parent, vjp in node.parents:
                if id(parent) not in relevant:
                    continue
                contribution = vjp(g)
                previous = cotangents.get(id(parent))
                cotangents[id(parent)] = (
                    contribution if previous is None else add(previous, contribution)
                )

    results = []
    for v in inputs:
        g = cotangents.get(id(v))
        results.append(g if g is not None else Var(np.zeros_like(v.value)))
    return results
