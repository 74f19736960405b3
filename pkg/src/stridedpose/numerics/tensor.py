"""Tape-based reverse-mode differentiation over float64 numpy arrays."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np


class NumericError(FloatingPointError):
    """Raised when a forward op produces NaN or Inf."""


class DimensionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class TapeError(RuntimeError):
    pass


_state = threading.local()


def grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable tape recording on the current thread."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


class Tensor:
    """A float64 array plus the tape node that produced it.

    Leaves created with ``requires_grad=True`` and a ``name`` are the
    trainable parameters; ``backward`` reports gradients keyed by that name.
    """

    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable | None = None
        self.op = "leaf"
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def __float__(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(op={self.op}, shape={self.shape})"

    # Arithmetic sugar; the functional ops live in ``ops``.
    def __add__(self, other):
        from .ops import add

        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul

        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        from .ops import matmul

        return matmul(self, other)

    def __getitem__(self, index):
        from .ops import take

        return take(self, index)

    def reshape(self, *shape):
        from .ops import reshape

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        from .ops import transpose

        return transpose(self, axes)

    def sum(self):
        from .ops import sum_all

        return sum_all(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")


def make_node(
    data: np.ndarray,
    parents: Sequence[Tensor],
    backward_fn: Callable[[np.ndarray], Iterable[np.ndarray | None]],
    op: str,
    check: bool = True,
) -> Tensor:
    """Wrap an op result, recording it on the tape when any parent needs grad."""
    if check:
        check_finite(data, op)
    out = Tensor(data)
    out.op = op
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    return out


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, int]] = [(root, 0)]
    while stack:
        node, i = stack.pop()
        key = id(node)
        if i == 0:
            mark = state.get(key)
            if mark == 2:
                continue
            if mark == 1:
                raise TapeError("cycle detected in tape")
            state[key] = 1
        if i < len(node.parents):
            stack.append((node, i + 1))
            child = node.parents[i]
            if child.requires_grad:
                cmark = state.get(id(child))
                if cmark == 1:
                    raise TapeError("cycle detected in tape")
                if cmark is None:
                    stack.append((child, 0))
        else:
            state[key] = 2
            order.append(node)
    return order


def backward(
    loss: Tensor,
    params: dict[str, Tensor] | None = None,
    seed: np.ndarray | float | None = None,
) -> dict[str, np.ndarray]:
    """Propagate ``seed`` (default 1.0) from a scalar ``loss`` to every named leaf.

    Every entry of ``params`` gets a gradient; leaves the loss does not touch
    get zeros.
    """
    if seed is None:
        if loss.data.size != 1:
            raise DimensionError("backward needs a scalar loss or an explicit seed")
        seed = np.ones_like(loss.data)
    grads: dict[int, np.ndarray] = {id(loss): np.asarray(seed, dtype=np.float64)}
    out: dict[str, np.ndarray] = {}
    if loss.requires_grad:
        for node in reversed(_topological_order(loss)):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.backward_fn is None:
                if node.name is not None:
                    out[node.name] = out[node.name] + g if node.name in out else g
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                k = id(parent)
                grads[k] = grads[k] + pg if k in grads else pg
    if params is not None:
        for name, t in params.items():
            if name not in out:
                out[name] = np.zeros_like(t.data)
    return out


def leaves(arrays: dict[str, np.ndarray], trainable: Callable[[str], bool] | None = None) -> dict[str, Tensor]:
    """Wrap a parameter map as named leaf tensors."""
    return {
        k: Tensor(v, requires_grad=trainable(k) if trainable else True, name=k)
        for k, v in arrays.items()
    }
