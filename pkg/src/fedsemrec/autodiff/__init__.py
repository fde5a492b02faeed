"""Dense-tensor kernel: reverse-mode autodiff, real FFT, Adam."""

from . import ops
from .fft import irfft, rfft, spectral_filter, spectrum_scale
from .optim import Adam, AdamState, adam_step
from .tensor import (
    ComplexTensor,
    Tensor,
    backward,
    default_dtype,
    grad_enabled,
    no_grad,
    use_dtype,
)

__all__ = [
    "Adam",
    "AdamState",
    "ComplexTensor",
    "Tensor",
    "adam_step",
    "backward",
    "default_dtype",
    "grad_enabled",
    "irfft",
    "no_grad",
    "ops",
    "rfft",
    "spectral_filter",
    "spectrum_scale",
    "use_dtype",
]
