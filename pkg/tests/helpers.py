"""Shared test oracles: central finite differences and error measures.

The gradient checks run in 64-bit mode with h = 1e-3; relative error is
max-norm of the difference over the sum of max-norms, which stays stable
when either side is near zero.
"""

from __future__ import annotations

import numpy as np

from fedsemrec.autodiff import backward, use_dtype


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.abs(a).max() + np.abs(b).max() + 1e-8
    return float(np.abs(a - b).max() / denom)


def finite_difference(make_loss, param, h: float = 1e-3) -> np.ndarray:
    """Central-difference gradient of make_loss() w.r.t. one parameter.

    make_loss must rebuild the forward pass from current param values and
    be deterministic (re-seed any RNG inside the closure).
    """
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = make_loss().item()
        flat[i] = orig - h
        f_minus = make_loss().item()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def assert_gradients_match(make_loss, params, h: float = 1e-3, tol: float = 1e-4,
                           require_nonzero: bool = True):
    """Compare tape gradients against finite differences for every param."""
    with use_dtype(np.float64):
        for p in params:
            p.grad = None
        loss = make_loss()
        backward(loss)
        any_nonzero = False
        for p in params:
            analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
            numeric = finite_difference(make_loss, p, h=h)
            err = rel_err(analytic, numeric)
            assert err < tol, f"gradient mismatch: rel err {err:.3e} on shape {p.data.shape}"
            if np.abs(analytic).max() > 0:
                any_nonzero = True
        if require_nonzero:
            assert any_nonzero, "all analytic gradients are zero; check is vacuous"


def naive_dft_onesided(x: np.ndarray) -> np.ndarray:
    """Direct O(m^2) one-sided DFT summation, the rfft oracle."""
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    bins = m // 2 + 1
    out = np.zeros(bins, dtype=np.complex128)
    for k in range(bins):
        acc = 0.0 + 0.0j
        for t in range(m):
            acc += x[t] * np.exp(-2j * np.pi * k * t / m)
        out[k] = acc
    return out
