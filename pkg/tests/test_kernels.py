import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from humask import kernels
from humask.intensity import bin_edges


def test_backend_selected_at_import():
    assert kernels.BACKEND in kernels.available_backends()
    assert "numpy" in kernels.available_backends()


def test_block_means_against_loop(backend):
    data = np.random.default_rng(0).normal(size=(6, 4, 9)).astype(np.float32)
    got = kernels.block_means(data, (3, 2, 3), impl=backend)
    for i in range(2):
        for j in range(2):
            for k in range(3):
                block = data[3 * i:3 * i + 3, 2 * j:2 * j + 2, 3 * k:3 * k + 3].astype(np.float64)
                assert got[i, j, k] == pytest.approx(block.mean(), rel=1e-12, abs=1e-15)


def test_block_mean_of_constant_is_exact(backend):
    data = np.full((16, 16, 16), 0.1, dtype=np.float32)
    got = kernels.block_means(data, (16, 16, 16), impl=backend)
    assert got[0, 0, 0] == float(np.float32(0.1))


def test_bin_indices_edge_rule(backend):
    edges = bin_edges(4)
    vals = np.array([-1, 0, 0.2499999, 0.25, 0.5, 0.75, 0.99, 1.0, 2.0, -np.inf, np.inf])
    assert list(kernels.bin_indices(vals, edges, impl=backend)) == [0, 0, 0, 1, 2, 3, 3, 3, 3, 0, 3]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 300), st.integers(0, 2**31), st.floats(-1, 0.5), st.floats(0.01, 3))
def test_backends_agree_on_bins(bins, seed, lo, width):
    edges = bin_edges(bins, (lo, lo + width))
    rng = np.random.default_rng(seed)
    vals = np.concatenate([rng.uniform(lo - 1, lo + width + 1, 500), edges, np.nextafter(edges, -np.inf)])
    ref = kernels.bin_indices(vals, edges, impl=kernels.available_backends()["numpy"])
    for impl in kernels.available_backends().values():
        np.testing.assert_array_equal(kernels.bin_indices(vals, edges, impl=impl), ref)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.tuples(st.integers(-2, 2), st.integers(-2, 2), st.integers(-2, 2)))
def test_backends_agree_on_joint_counts(seed, offset):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 8, size=(7, 6, 5))
    mask = rng.random((7, 6, 5)) < 0.7
    results = [kernels.neighbor_joint_counts(idx, mask, offset, 8, impl=impl)
               for impl in kernels.available_backends().values()]
    for r in results[1:]:
        np.testing.assert_array_equal(r, results[0])
    # brute force
    brute = np.zeros((8, 8), dtype=np.int64)
    for x in range(7):
        for y in range(6):
            for z in range(5):
                u, w, t = x + offset[0], y + offset[1], z + offset[2]
                if 0 <= u < 7 and 0 <= w < 6 and 0 <= t < 5 and mask[x, y, z] and mask[u, w, t]:
                    brute[idx[x, y, z], idx[u, w, t]] += 1
    np.testing.assert_array_equal(results[0], brute)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([(1, 1, 1), (2, 4, 8), (8, 8, 8), (4, 1, 2)]))
def test_backends_agree_on_block_means(seed, sub):
    data = np.random.default_rng(seed).uniform(0, 1, size=(16, 16, 16)).astype(np.float32)
    results = [kernels.block_means(data, sub, impl=impl) for impl in kernels.available_backends().values()]
    for r in results[1:]:
        np.testing.assert_allclose(r, results[0], rtol=1e-12, atol=1e-15)


def test_environment_forces_fallback():
    import os
    import subprocess
    import sys

    env = dict(os.environ, HUMASK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import humask; print(humask.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
