import os
import subprocess
import sys

import numpy as np
import pytest

from otto_ldf import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def _symmetric(rng, n, even=False):
    a = rng.normal(size=(n, n))
    a = a + a.T
    if even:
        a[np.add.outer(np.arange(n), np.arange(n)) % 2 == 1] = 0.0
    return a


def _series_reference(a, b):
    n = a.shape[0]
    c = np.zeros_like(a)
    for p in range(n):
        for q in range(n):
            c[p, q] = sum(a[i, j] * b[p - i, q - j] for i in range(p + 1) for j in range(q + 1))
    return c


@pytest.mark.parametrize("even", [False, True])
def test_series_mul_matches_definition(even):
    rng = np.random.default_rng(0)
    a, b = _symmetric(rng, 9, even), _symmetric(rng, 9, even)
    np.testing.assert_allclose(_kernels.series_mul_numpy(a, b, even), _series_reference(a, b),
                               rtol=1e-13, atol=1e-13)


def test_lattice_joint_matches_definition():
    rng = np.random.default_rng(1)
    a, b = rng.random((5, 5)), rng.random((5, 5))
    ref = np.zeros((9, 9))
    for n, m, k, l in np.ndindex(5, 5, 5, 5):
        ref[k - m + 4, l - n + 4] += a[n, m] * b[k, l]
    np.testing.assert_allclose(_kernels.lattice_joint_numpy(a, b), ref, rtol=1e-14)


def test_inverse_cdf_matches_searchsorted():
    rng = np.random.default_rng(2)
    cum = np.cumsum(rng.random((6, 10)), axis=1)
    rows = rng.integers(0, 6, 1000)
    u = rng.random(1000)
    ref = [np.searchsorted(cum[r], x * cum[r, -1], side="right") for r, x in zip(rows, u)]
    np.testing.assert_array_equal(_kernels.inverse_cdf_numpy(cum, rows, u), np.minimum(ref, 9))


@needs_numba
def test_backends_agree_bitwise():
    rng = np.random.default_rng(3)
    for even in (False, True):
        a, b = _symmetric(rng, 24, even), _symmetric(rng, 24, even)
        np.testing.assert_array_equal(_kernels.series_mul_numba(a, b, even),
                                      _kernels.series_mul_numpy(a, b, even))
    a, b = rng.random((12, 12)), rng.random((12, 12))
    np.testing.assert_array_equal(_kernels.lattice_joint_numba(a, b),
                                  _kernels.lattice_joint_numpy(a, b))
    cum = np.cumsum(rng.random((8, 30)), axis=1)
    rows = rng.integers(0, 8, 5000)
    u = rng.random(5000)
    np.testing.assert_array_equal(_kernels.inverse_cdf_numba(cum, rows, u),
                                  _kernels.inverse_cdf_numpy(cum, rows, u))


_PROBE = (
    "import numpy as np;"
    "from otto_ldf import _kernels, BathPair, HarmonicEngine, build_joint, sample_blocks;"
    "d = build_joint(HarmonicEngine(1.0, 2.0, 1.3), BathPair(3.0, 0.1));"
    "b = sample_blocks(HarmonicEngine(1.0, 2.0, 1.3), BathPair(3.0, 0.1), 4, 3000, seed=5);"
    "print(_kernels.BACKEND, d.p.sum().hex(), d.p[7].hex(), b.q2_sum.sum(), b.counts.tolist())"
)


def _probe(backend):
    env = dict(os.environ, OTTO_LDF_BACKEND=backend)
    return subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True)


@needs_numba
def test_pipeline_identical_across_backends():
    a, b = _probe("numba"), _probe("numpy")
    assert a.returncode == 0 and b.returncode == 0, a.stderr + b.stderr
    name_a, *rest_a = a.stdout.split(" ", 1)
    name_b, *rest_b = b.stdout.split(" ", 1)
    assert (name_a, name_b) == ("numba", "numpy")
    assert rest_a == rest_b


def test_unknown_backend_rejected():
    proc = _probe("fortran")
    assert proc.returncode != 0
    assert "OTTO_LDF_BACKEND" in proc.stderr
