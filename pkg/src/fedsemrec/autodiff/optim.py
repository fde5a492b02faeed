"""Bias-corrected Adam over Tensor parameters.

The per-element update runs through the kernel backend (compiled when
available, NumPy otherwise); this module owns the moment buffers and the
step counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._kernels import adam_step as _kernel_adam_step
from .tensor import Tensor


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)


def adam_step(state: AdamState, params: list[Tensor], grads: list[np.ndarray]) -> None:
    """Apply one update in place; moment buffers are created on first use."""
    if len(params) != len(grads):
        raise ValueError(f"{len(params)} params but {len(grads)} grads")
    if not state.first_moment:
        state.first_moment = [np.zeros_like(p.data) for p in params]
        state.second_moment = [np.zeros_like(p.data) for p in params]
    if len(state.first_moment) != len(params):
        raise ValueError("optimizer state tracks a different parameter count")
    state.step_count += 1
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if g.shape != p.data.shape:
            raise ValueError(f"grad shape {g.shape} != param shape {p.data.shape}")
        _kernel_adam_step(
            p.data, g, m, v,
            state.lr, state.beta1, state.beta2, state.eps, state.step_count,
        )


class Adam:
    """Convenience wrapper binding AdamState to a fixed parameter list."""

    def __init__(self, params, lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        """Update every bound parameter; a missing grad counts as zero."""
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                 for p in self.params]
        adam_step(self.state, self.params, grads)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
