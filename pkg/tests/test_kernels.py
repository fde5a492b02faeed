"""Compiled and pure kernel backends must agree to tolerance.

The pure NumPy module is the reference; the Cython extension only exists
for speed. Every test that needs both skips when the extension was not
built, so the suite stays green on a source-only install.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

import fedsemrec._kernels as kernels
from fedsemrec._kernels import pure

try:
    from fedsemrec._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled extension not built")


def _adam_state(rng, shape, dtype):
    param = rng.normal(size=shape).astype(dtype)
    grad = rng.normal(size=shape).astype(dtype)
    m = rng.normal(size=shape).astype(dtype) * 0.1
    v = np.abs(rng.normal(size=shape)).astype(dtype) * 0.1
    return param, grad, m, v


@needs_core
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("shape", [(7,), (5, 3), (2, 3, 4)])
def test_adam_step_backends_agree(dtype, shape):
    rng = np.random.default_rng(0)
    param, grad, m, v = _adam_state(rng, shape, dtype)
    args = (0.01, 0.9, 0.999, 1e-8, 3)
    p1, m1, v1 = param.copy(), m.copy(), v.copy()
    pure.adam_step(p1, grad, m1, v1, *args)
    p2, m2, v2 = param.copy(), m.copy(), v.copy()
    _core.adam_step(p2, grad, m2, v2, *args)
    tol = 1e-6 if dtype == np.float32 else 1e-12
    np.testing.assert_allclose(p1, p2, rtol=tol, atol=tol)
    np.testing.assert_allclose(m1, m2, rtol=tol, atol=tol)
    np.testing.assert_allclose(v1, v2, rtol=tol, atol=tol)


@needs_core
def test_adam_step_many_steps_stay_close():
    rng = np.random.default_rng(1)
    param, _, m, v = _adam_state(rng, (64,), np.float32)
    p1, m1, v1 = param.copy(), m.copy(), v.copy()
    p2, m2, v2 = param.copy(), m.copy(), v.copy()
    for t in range(1, 51):
        grad = rng.normal(size=64).astype(np.float32)
        pure.adam_step(p1, grad, m1, v1, 0.01, 0.9, 0.999, 1e-8, t)
        _core.adam_step(p2, grad, m2, v2, 0.01, 0.9, 0.999, 1e-8, t)
    np.testing.assert_allclose(p1, p2, rtol=1e-4, atol=1e-5)


@needs_core
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_assign_nearest_backends_agree(dtype):
    rng = np.random.default_rng(2)
    for _ in range(5):
        points = rng.normal(size=(200, 6)).astype(dtype)
        centroids = rng.normal(size=(9, 6)).astype(dtype)
        a = pure.assign_nearest(points, centroids)
        b = _core.assign_nearest(points, centroids)
        np.testing.assert_array_equal(a, b)


@needs_core
def test_assign_nearest_ties_break_identically():
    # Duplicate centroids force exact distance ties; both backends must
    # pick the lowest index.
    points = np.array([[0.0, 0.0], [1.0, 1.0], [0.5, 0.5]], dtype=np.float32)
    centroids = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]], dtype=np.float32)
    a = pure.assign_nearest(points, centroids)
    b = _core.assign_nearest(points, centroids)
    np.testing.assert_array_equal(a, b)
    assert a[1] == 0 and a[2] == 0


@needs_core
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_weighted_centroid_update_backends_agree(dtype):
    rng = np.random.default_rng(3)
    points = rng.normal(size=(300, 5)).astype(dtype)
    old = rng.normal(size=(8, 5)).astype(dtype)
    labels = pure.assign_nearest(points, old)
    a = pure.weighted_centroid_update(points, labels, old, 1e-8)
    b = _core.weighted_centroid_update(points, labels, old, 1e-8)
    tol = 2e-5 if dtype == np.float32 else 1e-10
    np.testing.assert_allclose(a, b, rtol=tol, atol=tol)


@needs_core
def test_weighted_centroid_update_empty_cluster_keeps_old_row():
    points = np.array([[0.0, 0.0], [2.0, 0.0]], dtype=np.float32)
    old = np.array([[0.1, 0.0], [1.9, 0.0], [50.0, 50.0]], dtype=np.float32)
    labels = np.array([0, 1], dtype=np.int64)
    for backend in (pure, _core):
        new = backend.weighted_centroid_update(points, labels, old, 1e-8)
        np.testing.assert_array_equal(new[2], old[2])


@pytest.mark.parametrize("backend", [pure] + ([_core] if _core else []),
                         ids=lambda b: b.BACKEND)
def test_each_backend_is_deterministic(backend):
    rng = np.random.default_rng(4)
    points = rng.normal(size=(120, 4)).astype(np.float32)
    old = rng.normal(size=(6, 4)).astype(np.float32)
    labels = backend.assign_nearest(points, old)
    again = backend.assign_nearest(points.copy(), old.copy())
    np.testing.assert_array_equal(labels, again)
    c1 = backend.weighted_centroid_update(points, labels, old, 1e-8)
    c2 = backend.weighted_centroid_update(points.copy(), labels.copy(), old.copy(), 1e-8)
    np.testing.assert_array_equal(c1, c2)


def test_selected_backend_exports_the_contract():
    assert kernels.BACKEND in ("pure", "cython")
    for name in ("adam_step", "assign_nearest", "weighted_centroid_update"):
        assert callable(getattr(kernels, name))


def test_env_var_pins_pure_backend():
    env = dict(os.environ, FEDSEMREC_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "import fedsemrec._kernels as k; print(k.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "pure"


@needs_core
def test_default_import_prefers_compiled_backend():
    env = {k: v for k, v in os.environ.items() if k != "FEDSEMREC_PURE"}
    out = subprocess.run(
        [sys.executable, "-c",
         "import fedsemrec._kernels as k; print(k.BACKEND)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "cython"


@needs_core
def test_clustering_pipeline_matches_across_backends():
    # End-to-end check through the public clustering routine: labels and
    # centroids must match between backends on the same input.
    from fedsemrec import cluster as cl

    rng = np.random.default_rng(5)
    points = rng.normal(size=(150, 4)).astype(np.float64)

    results = {}
    for module, name in ((pure, "pure"), (_core, "cython")):
        orig = (cl.assign_nearest, cl.weighted_centroid_update)
        cl.assign_nearest = module.assign_nearest
        cl.weighted_centroid_update = module.weighted_centroid_update
        try:
            batch = cl.UploadBatch(client_id="a", encodings=points)
            results[name] = cl.cluster([batch], k=5, max_iters=20,
                                       shift_tol=0.0,
                                       rng=np.random.default_rng(0))
        finally:
            cl.assign_nearest, cl.weighted_centroid_update = orig
    np.testing.assert_allclose(results["pure"].centroids,
                               results["cython"].centroids,
                               rtol=1e-9, atol=1e-9)
    np.testing.assert_array_equal(results["pure"].assignments,
                                  results["cython"].assignments)
