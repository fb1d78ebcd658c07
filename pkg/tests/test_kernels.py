import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isotrace import kernels

needs_ext = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernels not built")


@needs_ext
@given(st.integers(0, 2**31), st.floats(-3, 3), st.booleans())
@settings(max_examples=40, deadline=None)
def test_windowed_sum_backends_agree(seed, k, weighted):
    rng = np.random.default_rng(seed)
    lam = np.sort(rng.uniform(0, 300, 2000))
    x = np.sort(rng.uniform(0, 300, 64))
    w = rng.uniform(0, 3, len(lam)) if weighted else None
    a = kernels.windowed_sum(x, lam, w, k, 0.35, 33.6, backend="cython")
    b = kernels.windowed_sum(x, lam, w, k, 0.35, 33.6, backend="python")
    assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(b)))


@needs_ext
def test_exp_sum_backends_agree():
    rng = np.random.default_rng(1)
    lam = rng.uniform(0, 100, 500)
    t = np.linspace(-5, 5, 101)
    w = rng.uniform(0, 1, 500)
    for wts in (None, w):
        a = kernels.exp_sum(t, lam, wts, backend="cython")
        b = kernels.exp_sum(t, lam, wts, backend="python")
        assert np.max(np.abs(a - b)) < 1e-10


@pytest.mark.parametrize("backend", ["python", pytest.param("cython", marks=needs_ext)])
def test_cutoff_matches_full_sum(backend):
    rng = np.random.default_rng(2)
    lam = np.sort(rng.uniform(0, 200, 3000))
    x = np.linspace(50, 150, 30)
    full = kernels.windowed_sum(x, lam, None, 1.0, 0.35, np.inf, backend=backend)
    cut = kernels.windowed_sum(x, lam, None, 1.0, 0.35, 33.6, backend=backend)
    assert np.max(np.abs(full - cut)) < 1e-13  # dropped terms are below 1e-30; only rounding differs


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.windowed_sum([1.0], [1.0], backend="fortran")
