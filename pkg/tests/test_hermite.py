import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.hermite import hermgauss, hermval

from isotrace.errors import DegreeError
from isotrace.families import beat_perturbation, rotation_perturbation
from isotrace.hermite import (average_matrix, average_operator, block_spectrum, build_H0, h0_matrix,
                              level_dim, make_order1_perturbation, map_levels, multi_indices,
                              quantize_weyl_quadratic, rank)
from isotrace.symbols import REAL, PhasePolynomial


def rv(d, j, conj=False):
    return PhasePolynomial.variable(REAL, d, j, conj)


def anisotropic():
    x1, xi1, x2, xi2 = rv(2, 0), rv(2, 0, True), rv(2, 1), rv(2, 1, True)
    return x1 * x1 + xi1 * xi1 - x2 * x2 - xi2 * xi2


def hermite_functions(n_max, x):
    out = []
    for n in range(n_max + 1):
        c = np.zeros(n + 1)
        c[n] = 1
        norm = 1 / math.sqrt(2.0 ** n * math.factorial(n) * math.sqrt(math.pi))
        out.append(norm * hermval(x, c))
    return np.array(out)  # times exp(-x^2/2), absorbed in the quadrature weight


def test_basis_order_and_rank():
    idx = multi_indices(3, 3)
    assert len(idx) == level_dim(3, 3) == 10
    assert [tuple(r) for r in idx] == sorted(tuple(r) for r in idx)
    assert np.array_equal(rank(idx, 3), np.arange(10))
    assert np.array_equal(multi_indices(5000, 2)[:3], [[0, 5000], [1, 4999], [2, 4998]])


def test_build_H0_examples():
    B = build_H0(2, 4)
    assert np.allclose(B.block(3), 4 * np.eye(4))
    assert np.allclose(build_H0(1, 0).block(0), [[0.5]])
    assert np.allclose(build_H0(3, 2).block(2), 3.5 * np.eye(6))


def test_quantize_p2_is_oscillator():
    for d in (1, 2, 3):
        M = quantize_weyl_quadratic(PhasePolynomial.p2(REAL, d)).matrix(5)
        assert np.allclose(M.toarray(), h0_matrix(d, 5).toarray(), atol=1e-14)


def test_position_matches_hermite_quadrature():
    n_max = 12
    X = quantize_weyl_quadratic(rv(1, 0)).matrix(n_max).toarray()
    x, w = hermgauss(60)
    h = hermite_functions(n_max + 1, x)
    oracle = np.einsum("k,ik,jk->ij", w * x, h, h)[: n_max + 1, : n_max + 1]
    assert np.allclose(X.real, oracle, atol=1e-12)
    assert np.allclose(X.imag, 0, atol=1e-15)
    assert np.allclose(np.diag(X, 1), np.sqrt(np.arange(1, n_max + 1) / 2))


def test_anisotropic_eigenvalues_are_level_differences():
    Q = quantize_weyl_quadratic(anisotropic())
    for N in range(6):
        M = Q.block(N, N).toarray()
        assert np.allclose(M, np.diag(np.diag(M)))
        n1 = multi_indices(N, 2)[:, 0]
        # a_j^dagger a_j + 1/2 per mode, constants cancel
        assert np.allclose(np.diag(M).real, 2 * n1 - 2 * (N - n1))


def test_degree_three_rejected():
    with pytest.raises(DegreeError):
        quantize_weyl_quadratic(rv(1, 0) ** 3)


def test_order1_examples():
    d = 2
    P = make_order1_perturbation(PhasePolynomial.p2(REAL, d) * 2)
    for N in range(6):
        assert np.allclose(P.block(N, N).toarray(), 2 * np.sqrt(N + 1) * np.eye(N + 1))
    Z = make_order1_perturbation(PhasePolynomial.zero(REAL, 2))
    assert Z.matrix(3).nnz == 0 or np.abs(Z.matrix(3).toarray()).max() == 0
    B = average_operator(make_order1_perturbation(anisotropic()), 200)
    ev = block_spectrum(B, 200, method="eigh").eigenvalues
    assert ev[-1] == pytest.approx(2 * 200 / np.sqrt(201))
    assert ev[0] == pytest.approx(-2 * 200 / np.sqrt(201))


def test_order1_coupling_range():
    P = make_order1_perturbation(beat_perturbation())
    assert set(P.shifts()) <= {-2, 0, 2}
    M = P.matrix(8)
    assert abs(M - M.conj().T).max() < 1e-14


def test_average_examples():
    P = make_order1_perturbation(anisotropic(), n_max=6)
    B = average_operator(P)
    for N in range(7):
        assert np.allclose(B.block(N), P.block(N, N).toarray())
    # pure level-raising part averages to zero
    x1, xi1 = rv(1, 0), rv(1, 0, True)
    off = make_order1_perturbation(x1 * x1 - xi1 * xi1, n_max=6)
    assert all(np.abs(average_operator(off).block(N)).max() == 0 for N in range(7))


def test_average_commutes_and_preserves_traces():
    n_max = 8
    P = make_order1_perturbation(rotation_perturbation(), n_max=n_max)
    M = P.matrix()
    A = average_matrix(M, 2, n_max)
    H0 = h0_matrix(2, n_max)
    assert abs(H0 @ A - A @ H0).max() == 0
    assert abs(average_matrix(A, 2, n_max) - A).max() == 0
    offs = np.cumsum([0] + [level_dim(N, 2) for N in range(n_max + 1)])
    B = average_operator(P)
    Md = M.toarray()
    for N in range(n_max + 1):
        s = slice(offs[N], offs[N + 1])
        assert np.trace(Md[s, s]) == pytest.approx(np.trace(B.block(N)))


def test_block_spectrum_examples():
    B0 = average_operator(make_order1_perturbation(PhasePolynomial.zero(REAL, 2), n_max=4))
    assert np.all(block_spectrum(B0, 4).eigenvalues == 0)
    Bc = average_operator(make_order1_perturbation(PhasePolynomial.p2(REAL, 2) * 3, n_max=4))
    assert np.allclose(block_spectrum(Bc, 4).eigenvalues, 3 * np.sqrt(5))
    Ba = average_operator(make_order1_perturbation(anisotropic(), n_max=10))
    ev = block_spectrum(Ba, 10, method="eigh").eigenvalues
    assert len(ev) == 11
    assert np.allclose(ev, -ev[::-1], atol=1e-10)


@pytest.mark.parametrize("q", [beat_perturbation(), rotation_perturbation()])
def test_modes_match_dense_eigensolve(q):
    B = average_operator(make_order1_perturbation(q, n_max=40))
    for N in (0, 1, 7, 40):
        a = block_spectrum(B, N, "modes").eigenvalues
        b = block_spectrum(B, N, "eigh").eigenvalues
        assert np.allclose(a, b, atol=1e-11)


def test_blocks_hermitian():
    B = average_operator(make_order1_perturbation(rotation_perturbation(), n_max=12))
    assert all(B.is_hermitian(N) for N in range(13))


def test_map_levels_deterministic():
    B = average_operator(make_order1_perturbation(rotation_perturbation(), n_max=30))

    def fn(N):
        return block_spectrum(B, N, "eigh").eigenvalues

    a = map_levels(fn, range(31), threads=1)
    b = map_levels(fn, reversed(range(31)), threads=4)
    assert list(a) == list(b) == list(range(31))
    assert all(np.array_equal(a[N], b[N]) for N in a)


def test_scaled_extremes_converge():
    # the averaged beat symbol ranges over [-0.1, 0.1]
    B = average_operator(make_order1_perturbation(beat_perturbation(), n_max=4096))
    Ns = np.array([64, 128, 256, 512, 1024, 2048, 4096])
    gaps = []
    for N in Ns:
        ev = block_spectrum(B, int(N)).eigenvalues / np.sqrt(N)
        gaps.append(max(abs(ev[0] + 0.1), abs(ev[-1] - 0.1)))
    slope = np.polyfit(np.log(Ns), np.log(gaps), 1)[0]
    assert slope <= -0.4


@given(st.integers(0, 60), st.integers(1, 4))
@settings(max_examples=30, deadline=None)
def test_rank_roundtrip(N, d):
    idx = multi_indices(N, d)
    assert np.array_equal(rank(idx, N), np.arange(len(idx)))
    assert np.all(idx.sum(axis=1) == N)
