"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a row-major NumPy array. Operations from
:mod:`fedsemrec.autodiff.ops` record a backward closure on their output;
:func:`backward` replays those closures in reverse topological order and
accumulates gradients into every reachable tensor with ``requires_grad``.

Training runs in float32. Gradient-check tests switch to float64 via
:func:`use_dtype`; both the default dtype and the tape on/off switch are
thread-local so parallel federation clients do not interfere.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np


class _ThreadState(threading.local):
    def __init__(self):
        self.dtype = np.float32
        self.grad_enabled = True


_state = _ThreadState()


def default_dtype() -> np.dtype:
    return np.dtype(_state.dtype)


@contextmanager
def use_dtype(dtype):
    """Run a block with a different default float dtype (e.g. float64)."""
    prev = _state.dtype
    _state.dtype = np.dtype(dtype)
    try:
        yield
    finally:
        _state.dtype = prev


@contextmanager
def no_grad():
    """Disable tape recording inside the block (evaluation / uploads)."""
    prev = _state.grad_enabled
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def grad_enabled() -> bool:
    return _state.grad_enabled


class Tensor:
    """A dense float tensor, optionally tracked by the autodiff tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype if dtype is not None else default_dtype())
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(default_dtype())
        self.data = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction used by ops ------------------------------------------

    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # -- basic introspection -----------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """A view of the same values with no tape linkage."""
        return Tensor(self.data, requires_grad=False, dtype=self.data.dtype)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad = self.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    # -- operator sugar (delegates to ops) -----------------------------------

    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        from . import ops

        return ops.mul(self, 1.0 / float(scalar))

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def backward(self) -> None:
        backward(self)


class ComplexTensor:
    """Complex values stored as separate real/imaginary float arrays.

    Holds spectra (rfft output) and filter coefficient values; it is a
    plain value container, not a tape node.
    """

    __slots__ = ("re", "im")

    def __init__(self, re, im):
        self.re = np.ascontiguousarray(np.asarray(re))
        self.im = np.ascontiguousarray(np.asarray(im))
        if self.re.shape != self.im.shape:
            raise ValueError(
                f"real/imaginary shape mismatch: {self.re.shape} vs {self.im.shape}"
            )

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexTensor":
        z = np.asarray(z)
        return cls(z.real.copy(), z.imag.copy())

    def to_complex(self) -> np.ndarray:
        return self.re + 1j * self.im

    @property
    def shape(self) -> tuple[int, ...]:
        return self.re.shape

    def __repr__(self) -> str:
        return f"ComplexTensor(shape={self.re.shape}, dtype={self.re.dtype})"


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every tensor reachable from ``loss``.

    ``loss`` must be scalar. A loss with no recorded parents (a constant)
    is a no-op: nothing depends on any parameter.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    # Iterative post-order topological sort; recursion would overflow on
    # long accumulation chains.
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and parent.requires_grad:
                stack.append((parent, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
