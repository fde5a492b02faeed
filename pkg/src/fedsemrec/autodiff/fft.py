"""Real FFT primitives and the differentiable spectral filter.

``rfft``/``irfft`` are plain value transforms (no tape); the learnable path
through the frequency domain is the fused :func:`spectral_filter`, which
computes ``irfft(W * rfft(x))`` along the time axis and knows its own
backward pass.

The backward pass works on the one-sided spectrum, so the Hermitian
redundancy of the real FFT must be weighted explicitly: with
``Z = W * rfft(x)`` and upstream gradient ``g``,

* ``dL/dZ = s * rfft(g)`` where ``s = 1/m`` at the DC bin (and at the
  Nyquist bin when ``m`` is even) and ``2/m`` elsewhere, because interior
  bins appear twice in the full spectrum;
* ``dL/dW = conj(rfft(x)) * dL/dZ``;
* ``dL/dx = irfft(m * u * conj(W) * dL/dZ, m)`` with ``u = 1`` at DC and
  even-``m`` Nyquist and ``1/2`` elsewhere, the inverse weighting.

``numpy.fft.irfft`` discards the imaginary parts of the DC and even-length
Nyquist bins, so the corresponding imaginary filter gradients are zeroed:
those coefficients cannot affect the output.
"""

from __future__ import annotations

import numpy as np

from .tensor import ComplexTensor, Tensor


def _raw(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def rfft(x, axis: int = -2) -> ComplexTensor:
    """One-sided DFT of a real signal along the sequence axis."""
    data = _raw(x)
    if data.shape[axis] < 1:
        raise ValueError("rfft of an empty sequence")
    return ComplexTensor.from_complex(np.fft.rfft(data, axis=axis))


def irfft(y: ComplexTensor, m: int, axis: int = -2) -> Tensor:
    """Inverse of :func:`rfft` back to a length-``m`` real signal."""
    z = y.to_complex() if isinstance(y, ComplexTensor) else np.asarray(y)
    if z.shape[axis] != m // 2 + 1:
        raise ValueError(
            f"spectrum has {z.shape[axis]} bins, length {m} needs {m // 2 + 1}"
        )
    return Tensor(np.fft.irfft(z, n=m, axis=axis))


def spectrum_scale(m: int, dtype=np.float64) -> np.ndarray:
    """Per-bin weight ``s`` mapping time-domain gradients onto the one-sided
    spectrum: ``1/m`` at bins that occur once in the full spectrum, ``2/m``
    at bins that occur twice. Also the Parseval weight divided by ``1/m``."""
    n_bins = m // 2 + 1
    s = np.full(n_bins, 2.0 / m, dtype=dtype)
    s[0] = 1.0 / m
    if m % 2 == 0:
        s[-1] = 1.0 / m
    return s


def spectral_filter(x: Tensor, w_re: Tensor, w_im: Tensor) -> Tensor:
    """Apply a learnable frequency response along the time axis.

    ``x`` is ``[m, d]`` or batched ``[B, m, d]`` (equal lengths per batch).
    ``w_re``/``w_im`` hold the response for a maximum-length signal with
    ``floor(m_max / 2) + 1`` rows; a shorter input uses only the first
    ``floor(m / 2) + 1`` rows, so the DC row always scales the mean
    component regardless of sequence length.
    """
    if x.data.ndim not in (2, 3):
        raise ValueError(f"expected [m, d] or [B, m, d] input, got {x.data.shape}")
    m, d = x.data.shape[-2], x.data.shape[-1]
    if m < 1:
        raise ValueError("spectral_filter of an empty sequence")
    n_bins = m // 2 + 1
    if w_re.data.shape[0] < n_bins:
        raise ValueError(
            f"filter has {w_re.data.shape[0]} frequency rows, input needs {n_bins}"
        )
    if w_re.data.shape[1] != d:
        raise ValueError(f"filter width {w_re.data.shape[1]} != input width {d}")

    spec = np.fft.rfft(x.data, axis=-2)
    w = w_re.data[:n_bins] + 1j * w_im.data[:n_bins]
    out_data = np.fft.irfft(w * spec, n=m, axis=-2).astype(x.data.dtype)

    def bwd(g):
        s = spectrum_scale(m, dtype=g.dtype)[:, None]
        gz = s * np.fft.rfft(g, axis=-2)
        if w_re.requires_grad or w_im.requires_grad:
            gw = np.conj(spec) * gz
            if gw.ndim == 3:
                gw = gw.sum(axis=0)
            gw_re = gw.real.astype(w_re.data.dtype)
            gw_im = gw.imag.astype(w_im.data.dtype)
            # irfft never reads these imaginary coefficients.
            gw_im[0] = 0.0
            if m % 2 == 0:
                gw_im[-1] = 0.0
            if w_re.data.shape[0] > n_bins:
                pad = ((0, w_re.data.shape[0] - n_bins), (0, 0))
                gw_re = np.pad(gw_re, pad)
                gw_im = np.pad(gw_im, pad)
            if w_re.requires_grad:
                w_re.accumulate_grad(gw_re)
            if w_im.requires_grad:
                w_im.accumulate_grad(gw_im)
        if x.requires_grad:
            u = np.full((n_bins, 1), 0.5, dtype=g.dtype)
            u[0] = 1.0
            if m % 2 == 0:
                u[-1] = 1.0
            gx = np.fft.irfft(m * u * np.conj(w) * gz, n=m, axis=-2)
            x.accumulate_grad(gx.astype(x.data.dtype))

    return Tensor._result(out_data, (x, w_re, w_im), bwd)
