import os
import subprocess
import sys

import numpy as np
import pytest

from rica import _kernels, _ksg_py

ext = pytest.importorskip("rica._ksg_ext", reason="compiled extension not built")


def _cases(rng):
    yield rng.normal(size=(1500, 6))
    yield rng.standard_cauchy(size=(800, 3))
    yield np.round(rng.normal(size=(1000, 3)), 1)  # many ties
    yield rng.integers(0, 3, size=(300, 2)).astype(float)  # duplicates, eps = 0
    yield rng.normal(size=(50, 1))


@pytest.mark.parametrize("k", [1, 3, 5])
def test_compiled_matches_numpy_bit_for_bit(k, rng):
    for X in _cases(rng):
        X = np.ascontiguousarray(X)
        e1, c1 = ext.ksg_counts(X, k)
        e2, c2 = _ksg_py.ksg_counts(X, k)
        assert np.array_equal(e1, e2)
        assert np.array_equal(c1, c2)


def test_counts_against_direct_definition(rng):
    X = rng.normal(size=(60, 3))
    eps, counts = _ksg_py.ksg_counts(X, 3)
    diff = np.abs(X[:, None, :] - X[None, :, :])
    dist = diff.max(axis=2)
    np.fill_diagonal(dist, np.inf)
    np.testing.assert_array_equal(eps, np.sort(dist, axis=1)[:, 2])
    inside = diff < eps[:, None, None]
    inside[np.arange(60), np.arange(60)] = False
    np.testing.assert_array_equal(counts, inside.sum(axis=1))


def test_default_backend_is_compiled():
    if os.environ.get("RICA_PURE_PYTHON"):
        pytest.skip("pure-Python path forced by the environment")
    assert _kernels.BACKEND == "compiled"


def test_environment_forces_numpy_fallback():
    env = dict(os.environ, RICA_PURE_PYTHON="1")
    code = "from rica import _kernels, _ksg_py; print(_kernels.BACKEND, _kernels.ksg_counts is _ksg_py.ksg_counts)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "True"]
