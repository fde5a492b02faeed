"""NumPy reference implementations of the hot loops.

These are the fallback for the compiled extension in ``_core.pyx``; both
backends implement the same three functions with identical semantics.
Matrix products and FFTs are not here: NumPy already routes those through
compiled BLAS/pocketfft, so only the fuseable elementwise/scan loops gain
from a native build.
"""

from __future__ import annotations

import numpy as np

BACKEND = "pure"


def adam_step(param, grad, m, v, lr, beta1, beta2, eps, t):
    """Bias-corrected Adam update, in place on param/m/v (any shape)."""
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= lr * m_hat / (np.sqrt(v_hat) + eps)


def assign_nearest(points, centroids):
    """Index of the squared-Euclidean nearest centroid per point.

    Ties go to the lowest centroid index (argmin keeps the first minimum).
    Distances use direct squared differences, not the expanded dot-product
    form, so exact ties round identically in both backends.
    """
    n = points.shape[0]
    k, d = centroids.shape
    labels = np.empty(n, dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, k * d))
    for start in range(0, n, chunk):
        block = points[start : start + chunk]
        diff = block[:, None, :] - centroids[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        labels[start : start + chunk] = np.argmin(d2, axis=1)
    return labels


def weighted_centroid_update(points, labels, old_centroids, epsilon):
    """Distance-weighted cluster means, weights 1/(dist-to-old-centroid + eps).

    Clusters with no member keep their previous centroid.
    """
    k = old_centroids.shape[0]
    dist = np.linalg.norm(points - old_centroids[labels], axis=1)
    w = 1.0 / (dist + epsilon)
    num = np.zeros_like(old_centroids)
    den = np.zeros(k, dtype=old_centroids.dtype)
    np.add.at(num, labels, w[:, None] * points)
    np.add.at(den, labels, w)
    new = old_centroids.copy()
    occupied = den > 0
    new[occupied] = num[occupied] / den[occupied, None]
    return new
