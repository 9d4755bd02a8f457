import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from app.engine.utils.exceptions import ContractError, DimensionError, NumericError

ArrayLike = np.ndarray | float | Sequence

# Node indices grow with forward execution, so sorting by index is a topological order
_node_counter = itertools.count()
_local = threading.local()


def is_grad_enabled() -> bool:
    """
    Check whether forward operations currently record tape nodes on this thread.

    :return: True unless inside a no_grad block.
    """
    return getattr(_local, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Disable tape recording for the current thread inside the block.
    """
    previous = is_grad_enabled()
    _local.grad_enabled = False
    try:
        yield
    finally:
        _local.grad_enabled = previous


@dataclass(eq=False)
class TapeNode:
    """
    Record of one differentiable operation.

    Attributes:
    - kind (str): The operation identifier.
    - inputs (tuple): The input tensors.
    - saved (dict): Intermediates needed by the backward rule.
    - index (int): Position in forward execution order.
    """
    kind: str
    inputs: tuple["Tensor", ...]
    saved: dict[str, Any]
    index: int = field(default_factory=lambda: next(_node_counter))
    grad: np.ndarray | None = None
    released: bool = False


class Tensor:
    """
    Dense 64-bit tensor taking part in a reverse-mode computation graph.
    """

    __slots__ = ("values", "requires_grad", "grad", "name", "node")

    def __init__(self, values: ArrayLike, requires_grad: bool = False, name: str | None = None) -> None:
        """
        :param values: Numeric data, copied into a contiguous float64 buffer.
        :param requires_grad: Whether gradients are accumulated into this tensor.
        :param name: Optional parameter name used in diagnostics.
        """
        self.values = np.array(values, dtype=np.float64, order="C")
        if self.values.ndim > 2:
            raise DimensionError(f"Tensors are at most 2-D, got shape {self.values.shape}")
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self.node: TapeNode | None = None

    @classmethod
    def zeros(cls, *shape: int) -> "Tensor":
        return cls(np.zeros(shape))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        return float(self.values)

    def numpy(self) -> np.ndarray:
        return self.values.copy()

    def detach(self) -> "Tensor":
        """
        Return a constant copy that no gradient flows through.
        """
        return Tensor(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f", name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor | float") -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


def as_tensor(value: "Tensor | ArrayLike") -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


@dataclass(frozen=True)
class OpRule:
    forward: Callable[..., tuple[np.ndarray, dict[str, Any]]]
    backward: Callable[..., tuple[np.ndarray | None, ...]]


_RULES: dict[str, OpRule] = {}


def _rule(kind: str, backward: Callable[..., tuple[np.ndarray | None, ...]]):
    def decorator(forward: Callable[..., tuple[np.ndarray, dict[str, Any]]]):
        _RULES[kind] = OpRule(forward, backward)
        return forward
    return decorator


def forward_op(kind: str, *inputs: Tensor, **attrs: Any) -> Tensor:
    """
    Evaluate one operation and record it on the tape when any input requires grad.

    :param kind: The operation identifier.
    :param inputs: The input tensors.
    :param attrs: Non-differentiable attributes of the operation (axis, bounds, factor, ...).
    :return: The result tensor.

    :raise DimensionError: If input shapes do not conform for this kind.
    :raise NumericError: If the result contains NaN or Inf.
    """
    rule = _RULES.get(kind)
    if rule is None:
        raise ContractError(f"Unknown operation kind: {kind}")
    inputs = tuple(as_tensor(x) for x in inputs)

    with np.errstate(all="ignore"):
        values, saved = rule.forward(*(x.values for x in inputs), **attrs)
    if not np.all(np.isfinite(values)):
        raise NumericError(f"Operation {kind} produced non-finite values")

    requires_grad = is_grad_enabled() and any(x.requires_grad for x in inputs)
    out = Tensor.__new__(Tensor)
    out.values = values
    out.requires_grad = requires_grad
    out.grad = None
    out.name = None
    out.node = TapeNode(kind, inputs, {**saved, **attrs}) if requires_grad else None
    return out


def backward(loss: Tensor) -> None:
    """
    Accumulate d(loss)/d(leaf) into every leaf that requires grad, then release the graph.

    :param loss: A 0-D tensor.

    :raise ContractError: If loss is not scalar or has no recorded graph.
    :raise NumericError: If a gradient becomes non-finite.
    """
    if loss.ndim != 0:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        if loss.requires_grad:
            loss.grad = np.ones(()) if loss.grad is None else loss.grad + 1.0
            return
        raise ContractError("backward called on a tensor without a recorded graph")
    if loss.node.released:
        raise ContractError("backward called through a graph that was already released")

    # Collect every node reachable from the loss
    nodes: list[TapeNode] = []
    seen: set[int] = set()
    stack = [loss.node]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        nodes.append(node)
        stack.extend(x.node for x in node.inputs if x.node is not None and not x.node.released)
    nodes.sort(key=lambda n: n.index, reverse=True)

    loss.node.grad = np.ones(())
    for node in nodes:
        if node.grad is None:
            continue
        grads = _RULES[node.kind].backward(node.grad, *(x.values for x in node.inputs), **node.saved)
        for tensor, grad in zip(node.inputs, grads):
            if grad is None or not tensor.requires_grad:
                continue
            if not np.all(np.isfinite(grad)):
                raise NumericError(f"Non-finite gradient flowing out of {node.kind}")
            if tensor.node is not None:
                tensor.node.grad = grad if tensor.node.grad is None else tensor.node.grad + grad
            else:
                tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad

    # Release the tape
    for node in nodes:
        node.grad = None
        node.saved = {}
        node.inputs = ()
        node.released = True


def _check_same(kind: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{kind}: shapes {a.shape} and {b.shape} differ")


def _is_bias_row(a: np.ndarray, b: np.ndarray) -> bool:
    return a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]


def _reduce_bias(grad: np.ndarray, like: np.ndarray) -> np.ndarray:
    return grad.sum(axis=0) if grad.ndim == 2 and like.ndim == 1 else grad


def _add_backward(g, a, b, **_):
    return g, _reduce_bias(g, b)


@_rule("add", _add_backward)
def _add(a, b):
    if not _is_bias_row(a, b):
        _check_same("add", a, b)
    return a + b, {}


def _sub_backward(g, a, b, **_):
    return g, _reduce_bias(-g, b)


@_rule("sub", _sub_backward)
def _sub(a, b):
    if not _is_bias_row(a, b):
        _check_same("sub", a, b)
    return a - b, {}


@_rule("mul", lambda g, a, b, **_: (g * b, g * a))
def _mul(a, b):
    _check_same("mul", a, b)
    return a * b, {}


def _matmul_backward(g, a, b, **_):
    if a.ndim == 2 and b.ndim == 2:
        return g @ b.T, a.T @ g
    if a.ndim == 1 and b.ndim == 2:
        return b @ g, np.outer(a, g)
    if a.ndim == 2 and b.ndim == 1:
        return np.outer(g, b), a.T @ g
    return g * b, g * a


@_rule("matmul", _matmul_backward)
def _matmul(a, b):
    if a.ndim == 0 or b.ndim == 0 or a.shape[-1] != b.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    return np.matmul(a, b), {}


def _affine_backward(g, x, w, b=None, **_):
    grad_x = g @ w
    grad_w = g.T @ x if g.ndim == 2 else np.outer(g, x)
    grad_b = None if b is None else (g.sum(axis=0) if g.ndim == 2 else g)
    return grad_x, grad_w, grad_b


@_rule("affine", _affine_backward)
def _affine(x, w, b=None):
    if w.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != w.shape[1]:
        raise DimensionError(f"affine: input {x.shape} does not conform to weight {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise DimensionError(f"affine: bias {b.shape} does not conform to weight {w.shape}")
    out = x @ w.T
    return (out if b is None else out + b), {}


@_rule("transpose", lambda g, a, **_: (g.T,))
def _transpose(a):
    if a.ndim != 2:
        raise DimensionError(f"transpose: expected a 2-D tensor, got shape {a.shape}")
    return np.ascontiguousarray(a.T), {}


def _concat_backward(g, *inputs, **_):
    bounds = np.cumsum([x.shape[-1] for x in inputs])[:-1]
    return tuple(np.split(g, bounds, axis=-1))


@_rule("concat", _concat_backward)
def _concat(*inputs):
    if not inputs:
        raise DimensionError("concat: no inputs")
    lead = inputs[0].shape[:-1]
    if any(x.ndim == 0 or x.shape[:-1] != lead for x in inputs):
        raise DimensionError(f"concat: leading shapes differ: {[x.shape for x in inputs]}")
    return np.concatenate(inputs, axis=-1), {}


def _slice_backward(g, a, start, stop, **_):
    grad = np.zeros_like(a)
    grad[..., start:stop] = g
    return (grad,)


@_rule("slice", _slice_backward)
def _slice(a, start, stop):
    if a.ndim == 0 or not 0 <= start < stop <= a.shape[-1]:
        raise DimensionError(f"slice: [{start}:{stop}] out of range for shape {a.shape}")
    return a[..., start:stop].copy(), {}


@_rule("sigmoid", lambda g, a, out, **_: (g * out * (1.0 - out),))
def _sigmoid(a):
    out = np.empty_like(a)
    positive = a >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-a[positive]))
    exp_a = np.exp(a[~positive])
    out[~positive] = exp_a / (1.0 + exp_a)
    return out, {"out": out}


@_rule("tanh", lambda g, a, out, **_: (g * (1.0 - out * out),))
def _tanh(a):
    out = np.tanh(a)
    return out, {"out": out}


@_rule("relu", lambda g, a, **_: (g * (a > 0),))
def _relu(a):
    return np.maximum(a, 0.0), {}


@_rule("exp", lambda g, a, out, **_: (g * out,))
def _exp(a):
    out = np.exp(a)
    return out, {"out": out}


@_rule("log", lambda g, a, **_: (g / a,))
def _log(a):
    return np.log(a), {}


@_rule("square", lambda g, a, **_: (2.0 * a * g,))
def _square(a):
    return a * a, {}


@_rule("scale", lambda g, a, factor, **_: (g * factor,))
def _scale(a, factor):
    return a * factor, {}


@_rule("clip", lambda g, a, low, high, **_: (g * ((a >= low) & (a <= high)),))
def _clip(a, low, high):
    return np.clip(a, low, high), {}


def _sum_backward(g, a, axis=None, **_):
    if axis is None:
        return (np.full_like(a, g),)
    return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)


@_rule("sum", _sum_backward)
def _sum(a, axis=None):
    return np.asarray(a.sum(axis=axis)), {}


def _mean_backward(g, a, axis=None, **_):
    count = a.size if axis is None else a.shape[axis]
    return (_sum_backward(g, a, axis)[0] / count,)


@_rule("mean", _mean_backward)
def _mean(a, axis=None):
    if a.size == 0:
        raise DimensionError("mean of an empty tensor")
    return np.asarray(a.mean(axis=axis)), {}


def add(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("add", a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("sub", a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("mul", a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return forward_op("matmul", a, b)


def affine(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """
    Compute x·Wᵀ + b for a vector or a batch of row vectors.

    :param x: Input of shape (in,) or (batch, in).
    :param weight: Weight of shape (out, in).
    :param bias: Optional bias row of shape (out,).
    :return: Output of shape (out,) or (batch, out).
    """
    if bias is None:
        return forward_op("affine", x, weight)
    return forward_op("affine", x, weight, bias)


def transpose(a: Tensor) -> Tensor:
    return forward_op("transpose", a)


def concat(*tensors: Tensor) -> Tensor:
    return forward_op("concat", *tensors)


def slice_last(a: Tensor, start: int, stop: int) -> Tensor:
    return forward_op("slice", a, start=start, stop=stop)


def sigmoid(a: Tensor) -> Tensor:
    return forward_op("sigmoid", a)


def tanh(a: Tensor) -> Tensor:
    return forward_op("tanh", a)


def relu(a: Tensor) -> Tensor:
    return forward_op("relu", a)


def exp(a: Tensor) -> Tensor:
    return forward_op("exp", a)


def log(a: Tensor) -> Tensor:
    return forward_op("log", a)


def square(a: Tensor) -> Tensor:
    return forward_op("square", a)


def scale(a: Tensor, factor: float) -> Tensor:
    return forward_op("scale", a, factor=float(factor))


def clip(a: Tensor, low: float, high: float) -> Tensor:
    return forward_op("clip", a, low=float(low), high=float(high))


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    return forward_op("sum", a, axis=axis)


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    return forward_op("mean", a, axis=axis)


def shift(a: Tensor, constant: float) -> Tensor:
    """
    Add a constant to every element.
    """
    return add(a, Tensor(np.full(a.shape, constant)))
