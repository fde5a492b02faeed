"""Differentiable primitives on :class:`~fedsemrec.autodiff.tensor.Tensor`.

Every function returns a new Tensor whose backward closure routes the
upstream gradient to each parent that requires one. Broadcasting follows
NumPy rules; gradients are summed over broadcast axes.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, default_dtype

_GELU_C = 0.7978845608028654  # sqrt(2 / pi)
_GELU_A = 0.044715


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=default_dtype()))


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (undo NumPy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# -- arithmetic --------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.data.shape))

    return Tensor._result(out_data, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.data.shape))

    return Tensor._result(out_data, (a, b), bwd)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(-g)

    return Tensor._result(-a.data, (a,), bwd)


def mul(a, b) -> Tensor:
    """Elementwise (or scalar) product with broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.data, b.data.shape))

    return Tensor._result(out_data, (a, b), bwd)


def matmul(a, b) -> Tensor:
    """Matrix product; supports 2-D x 2-D and batched 3-D operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2)
            a.accumulate_grad(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ g
            b.accumulate_grad(_unbroadcast(gb, b.data.shape))

    return Tensor._result(out_data, (a, b), bwd)


# -- shape -------------------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    a = _as_tensor(a)
    old_shape = a.data.shape

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(old_shape))

    return Tensor._result(a.data.reshape(shape), (a,), bwd)


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    a = _as_tensor(a)
    inverse = tuple(np.argsort(axes))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(np.ascontiguousarray(np.transpose(g, inverse)))

    return Tensor._result(np.ascontiguousarray(np.transpose(a.data, axes)), (a,), bwd)


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum(sizes)[:-1]
    out_data = np.concatenate([p.data for p in parts], axis=axis)

    def bwd(g):
        pieces = np.split(g, offsets, axis=axis)
        for p, piece in zip(parts, pieces):
            if p.requires_grad:
                p.accumulate_grad(np.ascontiguousarray(piece))

    return Tensor._result(out_data, tuple(parts), bwd)


def gather_rows(table: Tensor, index: np.ndarray) -> Tensor:
    """Row lookup ``table[index]``; backward scatter-adds into the table."""
    table = _as_tensor(table)
    index = np.asarray(index, dtype=np.int64)
    out_data = table.data[index]

    def bwd(g):
        if table.requires_grad:
            gt = np.zeros_like(table.data)
            np.add.at(gt, index, g)
            table.accumulate_grad(gt)

    return Tensor._result(out_data, (table,), bwd)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice ``a[start:stop]`` along the first axis."""
    a = _as_tensor(a)
    out_data = a.data[start:stop].copy()

    def bwd(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga[start:stop] = g
            a.accumulate_grad(ga)

    return Tensor._result(out_data, (a,), bwd)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice ``a[..., start:stop]`` along the last axis."""
    a = _as_tensor(a)
    out_data = np.ascontiguousarray(a.data[..., start:stop])

    def bwd(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga[..., start:stop] = g
            a.accumulate_grad(ga)

    return Tensor._result(out_data, (a,), bwd)


def slice_time(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice along the second-to-last (time) axis."""
    a = _as_tensor(a)
    out_data = np.ascontiguousarray(a.data[..., start:stop, :])

    def bwd(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga[..., start:stop, :] = g
            a.accumulate_grad(ga)

    return Tensor._result(out_data, (a,), bwd)


# -- reductions ---------------------------------------------------------------


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not a.requires_grad:
            return
        if axis is None:
            a.accumulate_grad(np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a.accumulate_grad(np.broadcast_to(g, a.data.shape).copy())

    return Tensor._result(out_data, (a,), bwd)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def abs(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    sign = np.sign(a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * sign)

    return Tensor._result(np.abs(a.data), (a,), bwd)


# -- activations ---------------------------------------------------------------


def sigmoid(a: Tensor) -> Tensor:
    a = _as_tensor(a)
    s = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * s * (1.0 - s))

    return Tensor._result(s, (a,), bwd)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    a = _as_tensor(a)
    positive = a.data > 0
    out_data = np.where(positive, a.data, slope * a.data)

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(np.where(positive, g, slope * g))

    return Tensor._result(out_data, (a,), bwd)


def gelu(a: Tensor) -> Tensor:
    """Gaussian error linear unit, tanh approximation."""
    a = _as_tensor(a)
    x = a.data
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    out_data = 0.5 * x * (1.0 + t)

    def bwd(g):
        if a.requires_grad:
            sech2 = 1.0 - t * t
            local = 0.5 * (1.0 + t) + 0.5 * x * sech2 * _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
            a.accumulate_grad(g * local)

    return Tensor._result(out_data, (a,), bwd)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        if a.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            a.accumulate_grad(y * (g - dot))

    return Tensor._result(y, (a,), bwd)


def layer_norm(a: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-8) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    a, gamma, beta = _as_tensor(a), _as_tensor(gamma), _as_tensor(beta)
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out_data = gamma.data * xhat + beta.data

    def bwd(g):
        if gamma.requires_grad:
            gamma.accumulate_grad(_unbroadcast(g * xhat, gamma.data.shape))
        if beta.requires_grad:
            beta.accumulate_grad(_unbroadcast(g, beta.data.shape))
        if a.requires_grad:
            gx = g * gamma.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            a.accumulate_grad((gx - m1 - xhat * m2) * inv)

    return Tensor._result(out_data, (a, gamma, beta), bwd)


def dropout(a: Tensor, rate: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout; identity when not training or rate is zero."""
    a = _as_tensor(a)
    if not training or rate <= 0.0:
        return a
    keep = 1.0 - rate
    mask = (rng.random(a.data.shape) < keep).astype(a.data.dtype) / keep

    def bwd(g):
        if a.requires_grad:
            a.accumulate_grad(g * mask)

    return Tensor._result(a.data * mask, (a,), bwd)


# -- losses --------------------------------------------------------------------


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log-softmax of the target column per row."""
    logits = _as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    n = logits.data.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - lse
    out_data = np.asarray(-log_probs[np.arange(n), targets].mean(), dtype=logits.data.dtype)

    def bwd(g):
        if logits.requires_grad:
            probs = np.exp(log_probs)
            probs[np.arange(n), targets] -= 1.0
            logits.accumulate_grad(g * probs / n)

    return Tensor._result(out_data, (logits,), bwd)
