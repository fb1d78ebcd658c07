import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isotrace.errors import CoverageGapError, LeakageError
from isotrace.families import beat_perturbation
from isotrace.hermite import SpectrumBlock, average_operator, block_spectrum, make_order1_perturbation
from isotrace.trace import (GaussianWindow, LevelSpectrumSource, assemble_spectrum, eval_e_series,
                            fit_rate, windowed_transform)


def zero_blocks(d, n_max):
    from math import comb
    return [SpectrumBlock(N, np.zeros(comb(N + d - 1, d - 1))) for N in range(n_max + 1)]


def test_assemble_examples():
    s = assemble_spectrum(zero_blocks(2, 2), 2)
    assert s.values.tolist() == [1, 2, 2, 3, 3, 3]
    assert s.level.tolist() == [0, 1, 1, 2, 2, 2]
    shifted = [SpectrumBlock(b.N, b.eigenvalues + 0.25) for b in zero_blocks(2, 3)]
    assert np.allclose(np.unique(assemble_spectrum(shifted, 2).values), [1.25, 2.25, 3.25, 4.25])
    with pytest.raises(CoverageGapError):
        assemble_spectrum(zero_blocks(2, 3)[:2] + zero_blocks(2, 3)[3:], 2)


def test_cluster_width():
    q = beat_perturbation()
    B = average_operator(make_order1_perturbation(q), 400)
    blocks = [block_spectrum(B, N) for N in range(401)]
    s = assemble_spectrum(blocks, 2)
    sel = s.values[s.level == 400]
    # averaged symbol ranges over [-0.1, 0.1]
    assert sel.max() - sel.min() == pytest.approx(0.2 * 400 / np.sqrt(401), rel=1e-12)


def test_window_ceiling():
    GaussianWindow(0.42)
    with pytest.raises(LeakageError):
        GaussianWindow(0.5)
    assert GaussianWindow.max_width() == pytest.approx(0.4227, abs=1e-4)


def test_singleton_transform():
    w = GaussianWindow()
    grid = np.linspace(40, 60, 41)
    T = windowed_transform(np.array([50.3]), 1, w, grid)
    # window centred at t = 2 pi: the phase is carried by lambda - lambda_0
    expected = np.exp(2j * np.pi * (grid - 50.3)) * w.kernel(grid - 50.3)
    assert np.allclose(T.values, expected, atol=1e-15)
    with pytest.raises(ValueError):
        windowed_transform(np.array([1.0]), 1, w, grid[::-1])


def test_kernel_is_fourier_transform_of_window():
    # (2 pi)^-1 int chi(t) e^{i t s} dt by quadrature, one point mass at distance s
    w = GaussianWindow(0.3)
    t = np.linspace(2 * np.pi - 4, 2 * np.pi + 4, 40001)
    for s in (0.0, 0.7, 3.1):
        val = np.trapezoid(w.time_profile(t, 1) * np.exp(1j * t * s), t) / (2 * np.pi)
        T = windowed_transform(np.array([10.0]), 1, w, np.array([10.0 + s]))
        assert abs(val - T.values[0]) < 1e-12


@given(st.lists(st.floats(10, 200), min_size=2, max_size=40, unique=True), st.integers(1, 39))
@settings(max_examples=40, deadline=None)
def test_linearity_in_point_masses(pts, cut):
    pts = np.sort(np.array(pts))
    cut = min(cut, len(pts) - 1)
    w = GaussianWindow()
    grid = np.linspace(5, 205, 50)
    full = windowed_transform(pts, 1, w, grid).values
    parts = windowed_transform(pts[:cut], 1, w, grid).values + windowed_transform(pts[cut:], 1, w, grid).values
    assert np.max(np.abs(full - parts)) < 1e-12


def test_time_reversal_symmetry_unperturbed():
    w = GaussianWindow()
    grid = np.linspace(500, 800, 31)
    src = LevelSpectrumSource(None, 2, 900)
    a = windowed_transform(src, 1, w, grid).values
    b = windowed_transform(src, -1, w, grid).values
    assert np.allclose(np.abs(a), np.abs(b), rtol=1e-10, atol=0)


def test_doubling_nmax_within_tail_bound():
    w = GaussianWindow()
    q = beat_perturbation()
    grid = np.linspace(900, 1000, 21)
    out = []
    for n_max in (1000, 2000):
        B = average_operator(make_order1_perturbation(q), n_max)
        out.append(windowed_transform(LevelSpectrumSource(B, 2, n_max), 1, w, grid))
    diff = np.abs(out[0].values - out[1].values)
    assert np.all(diff <= out[0].tail_bound + 1e-300)
    # a truncation that cuts into the window is reported in the bound
    B = average_operator(make_order1_perturbation(q), 960)
    short = windowed_transform(LevelSpectrumSource(B, 2, 960), 1, w, grid)
    assert np.all(np.abs(short.values - out[1].values) <= short.tail_bound)
    assert short.tail_bound.max() > 1e-3


def test_modulus_bounded_by_kernel_mass():
    w = GaussianWindow()
    pts = np.sort(np.random.default_rng(0).uniform(0, 100, 500))
    grid = np.linspace(0, 100, 200)
    T = windowed_transform(pts, 1, w, grid)
    bound = np.array([w.kernel(x - pts).sum() for x in grid])
    assert np.all(T.modulus <= bound + 1e-15)


def test_e_series_examples():
    t = np.array([0.3, 1.1, np.pi])
    a0 = eval_e_series(0.5, 0.0, 2, 50, t)
    N = np.arange(1, 51)
    mu = np.array([np.sum(N ** 0.5 * np.exp(1j * tt * (N + 1))) for tt in t])
    assert np.allclose(a0, mu, atol=1e-10)
    # r = 0, a = 0, t = pi: sum_{N=1}^{M} (-1)^{N+1}
    for M in (49, 50):
        assert eval_e_series(0, 0, 2, M, [np.pi])[0] == pytest.approx(1.0 if M % 2 else 0.0, abs=1e-10)


def test_fit_rate_examples():
    x = np.array([10.0, 20, 40, 80, 160])
    s, c, r = fit_rate(x, 3 / np.sqrt(x))
    assert s == pytest.approx(-0.5, abs=1e-10) and c == pytest.approx(np.log(3))
    assert fit_rate(x, np.full(5, 2.0))[0] == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_rate(x, -x)
    with pytest.raises(ValueError):
        fit_rate(x[:3], x[:3])
