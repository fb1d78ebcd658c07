from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isotrace.errors import DegreeError, VariableKindError
from isotrace.symbols import (COMPLEX, REAL, InvariantSymbol, PhasePolynomial, berezin_forward,
                              berezin_inverse, descend, evaluate, flow_average, kappa_pullback,
                              random_unitary, real_to_z)


def cvar(d, j, conj=False):
    return PhasePolynomial.variable(COMPLEX, d, j, conj)


def rvar(d, j, conj=False):
    return PhasePolynomial.variable(REAL, d, j, conj)


# strategies -----------------------------------------------------------------

def poly_strategy(kind, d, max_deg, rational=False):
    idx = st.tuples(*[st.integers(0, max_deg) for _ in range(d)])
    coef = (st.fractions(min_value=-5, max_value=5, max_denominator=7) if rational
            else st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))

    def build(items):
        terms = {}
        for a, b, c in items:
            if sum(a) + sum(b) <= max_deg:
                terms[(a, b)] = c
        return PhasePolynomial(kind, d, terms)

    return st.lists(st.tuples(idx, idx, coef), max_size=6).map(build)


# flow_average ---------------------------------------------------------------

def test_flow_average_examples():
    z1 = cvar(2, 0)
    assert flow_average(z1).is_zero()
    m = z1 * cvar(2, 0, True)
    assert flow_average(m) == m
    h = z1 * cvar(2, 1, True) + cvar(2, 1) * cvar(2, 0, True)
    assert flow_average(h) == h


def test_flow_average_rejects_real_kind():
    with pytest.raises(VariableKindError):
        flow_average(rvar(1, 0))


@given(poly_strategy(COMPLEX, 2, 4))
@settings(max_examples=60, deadline=None)
def test_flow_average_is_projection(p):
    a = flow_average(p)
    assert flow_average(a) == a
    assert a.is_invariant()


@given(poly_strategy(COMPLEX, 2, 4), st.integers(0, 2**31))
@settings(max_examples=30, deadline=None)
def test_flow_average_rotation_invariant(p, seed):
    rng = np.random.default_rng(seed)
    a = flow_average(p)
    z = rng.standard_normal((100, 2)) + 1j * rng.standard_normal((100, 2))
    th = rng.uniform(0, 2 * np.pi, (100, 1))
    assert np.allclose(a(z), a(np.exp(1j * th) * z), atol=1e-12 * max(1, p.coefficient_scale()) * 50)


# kappa ----------------------------------------------------------------------

def test_kappa_p2_and_constant():
    assert kappa_pullback(PhasePolynomial.p2(REAL, 1)) == PhasePolynomial.p2(COMPLEX, 1)
    assert kappa_pullback(PhasePolynomial.constant(REAL, 1, 1)) == PhasePolynomial.constant(COMPLEX, 1, 1)


def test_kappa_hyperbolic_term_by_evaluation():
    # x^2 - xi^2 pulls back to z^2 + zbar^2 with z = (x - i xi)/sqrt 2
    x, xi = rvar(1, 0), rvar(1, 0, True)
    p = kappa_pullback(x * x - xi * xi)
    assert p == cvar(1, 0) ** 2 + cvar(1, 0, True) ** 2
    rng = np.random.default_rng(1)
    X, XI = rng.standard_normal((2, 1000, 1))
    lhs = (X ** 2 - XI ** 2)[:, 0]
    rhs = p(real_to_z(X, XI))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@given(poly_strategy(REAL, 2, 3), st.integers(0, 2**31))
@settings(max_examples=40, deadline=None)
def test_kappa_preserves_values(p, seed):
    rng = np.random.default_rng(seed)
    X, XI = rng.uniform(-1, 1, (2, 1000, 2))
    q = kappa_pullback(p)
    assert q.degree() == p.degree()
    scale = max(1.0, p.coefficient_scale())
    assert np.max(np.abs(p(X, XI) - q(real_to_z(X, XI)))) < 1e-12 * scale * 10


def test_kappa_rejects_complex():
    with pytest.raises(VariableKindError):
        kappa_pullback(cvar(1, 0))


# Berezin ----------------------------------------------------------------------

def test_berezin_degree_operator():
    for d in (1, 2, 3):
        n2 = PhasePolynomial.p2(COMPLEX, d)
        assert berezin_forward(n2 - Fraction(d, 2)) == n2 - d


def test_berezin_constant():
    c = PhasePolynomial.constant(COMPLEX, 2, Fraction(3, 7))
    assert berezin_forward(c) == c


def _fd_laplacian(f, x, y, h=1e-3):
    return (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4 * f(x, y)) / h ** 2


def test_berezin_quartic_against_finite_differences():
    z, zb = cvar(1, 0), cvar(1, 0, True)
    p = z * z * zb * zb
    q = berezin_forward(p)
    assert q == p - z * zb * 2 + Fraction(1, 2)

    def f(x, y):
        return ((x * x + y * y) ** 2)

    rng = np.random.default_rng(2)
    for x, y in rng.uniform(-1, 1, (20, 2)):
        lap = _fd_laplacian(f, x, y)
        lap2 = _fd_laplacian(lambda a, b: _fd_laplacian(f, a, b, 1e-2), x, y, 1e-2)
        oracle = f(x, y) - lap / 8 + lap2 / 128
        assert abs(oracle - q(np.array([x + 1j * y])).real) < 1e-4


@given(poly_strategy(COMPLEX, 2, 8, rational=True))
@settings(max_examples=40, deadline=None)
def test_berezin_inverse_roundtrip_exact(p):
    assert berezin_inverse(berezin_forward(p)) == p
    assert berezin_forward(berezin_inverse(p)) == p


# descend / evaluate --------------------------------------------------------------

def test_descend_examples():
    d2 = cvar(2, 0) * cvar(2, 0, True) - cvar(2, 1) * cvar(2, 1, True)
    H = descend(d2, 1)
    assert H.isotropic_order == 1
    assert evaluate(H, np.array([1, 0])) == pytest.approx(1.0)
    one = descend(PhasePolynomial.p2(COMPLEX, 3), 0)
    rng = np.random.default_rng(0)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    assert evaluate(one, z / np.linalg.norm(z)) == pytest.approx(1.0, abs=1e-14)
    off = descend(cvar(2, 0) * cvar(2, 1, True) + cvar(2, 1) * cvar(2, 0, True), 0)
    assert evaluate(off, np.array([1, 0])) == 0.0


def test_descend_promotes_constants():
    H = descend(PhasePolynomial.constant(COMPLEX, 2, 1), 0)
    assert H.k == 1
    assert evaluate(H, np.array([0.6, 0.8j])) == pytest.approx(1.0)


def test_descend_rejections():
    with pytest.raises(DegreeError):
        descend(cvar(2, 0), 0)
    with pytest.raises(DegreeError):
        descend(PhasePolynomial.p2(COMPLEX, 2) + 1, 0)


def test_evaluate_examples_and_unit_check():
    H = descend(cvar(2, 0) * cvar(2, 0, True) - cvar(2, 1) * cvar(2, 1, True), 0)
    assert evaluate(H, np.array([1, 0])) == 1
    assert evaluate(H, np.array([0, 1])) == -1
    assert abs(evaluate(H, np.array([1, 1]) / np.sqrt(2))) < 1e-15
    with pytest.raises(ValueError):
        evaluate(H, np.array([1.0, 1.0]))


def test_invariant_symbol_hermitian_check():
    with pytest.raises(ValueError):
        InvariantSymbol(2, 1, {((1, 0), (0, 1)): 1.0})


def test_invariant_symbol_orbit_constancy():
    rng = np.random.default_rng(3)
    C = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    H = InvariantSymbol.from_hermitian(C + C.conj().T)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    z /= np.linalg.norm(z)
    vals = [evaluate(H, np.exp(1j * t) * z) for t in rng.uniform(0, 7, 20)]
    assert np.ptp(vals) < 1e-12


def test_rotation_convention():
    rng = np.random.default_rng(4)
    H = InvariantSymbol.from_hermitian(np.diag([1.0, -0.5, 0.2]))
    U = random_unitary(3, rng)
    Hr = H.rotate(U)
    z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    z /= np.linalg.norm(z)
    assert evaluate(Hr, U @ z) == pytest.approx(evaluate(H, z), abs=1e-13)


def test_symbol_arithmetic_homogenises():
    h = InvariantSymbol(2, 1, {((1, 0), (1, 0)): 1})
    g = h + 1
    z = np.array([0.6, 0.8])
    assert evaluate(g, z) == pytest.approx(1.36)
    sq = InvariantSymbol(2, 2, (h.polynomial() * h.polynomial()).terms)
    s = sq + h
    assert s.k == 2
    assert evaluate(s, z) == pytest.approx(0.36 ** 2 + 0.36)
