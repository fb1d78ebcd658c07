"""Standard symbols and perturbations used by the experiments."""
from __future__ import annotations

import numpy as np

from .symbols import COMPLEX, REAL, InvariantSymbol, PhasePolynomial, descend, flow_average, kappa_pullback, random_unitary


def _xv(d, j, conj=False):
    return PhasePolynomial.variable(REAL, d, j, conj)


def height(d: int = 2) -> InvariantSymbol:
    """``|z_1|^2 / |z|^2``."""
    e = tuple(1 if i == 0 else 0 for i in range(d))
    return InvariantSymbol(d, 1, {(e, e): 1})


def height_quadratic(c1: float = 0.25, c2: float = 0.25, d: int = 2) -> InvariantSymbol:
    """``c1 h + c2 h^2`` with ``h`` the height function, written with bidegree 2.

    The quadratic term spreads the Toeplitz eigenvalues non-uniformly, which
    keeps the Toeplitz trace free of the exact cancellations that a purely
    linear height produces.
    """
    h = height(d)
    p = h.raise_degree(2).polynomial() * c1 + h.polynomial() * h.polynomial() * c2
    return InvariantSymbol(d, 2, p.terms)


def rotated(H: InvariantSymbol, seed: int) -> InvariantSymbol:
    return H.rotate(random_unitary(H.d, np.random.default_rng(seed)))


def beat_perturbation(a: float = 0.1) -> PhasePolynomial:
    """Quadratic whose averaged symbol on CP^1 has values in [-a, a].

    The flow-invariant part is ``a (x1 x2 + xi1 xi2)``. The level-coupling
    terms vanish under averaging.
    """
    x1, xi1, x2, xi2 = _xv(2, 0), _xv(2, 0, True), _xv(2, 1), _xv(2, 1, True)
    return (x1 * x2 + xi1 * xi2) * a + (x1 * x1 - xi1 * xi1) * 0.05 + (x1 * xi2 + xi1 * x2) * 0.04


def rotation_perturbation() -> PhasePolynomial:
    """Anisotropic quadratic with an angular-momentum term and level-coupling parts."""
    x1, xi1, x2, xi2 = _xv(2, 0), _xv(2, 0, True), _xv(2, 1), _xv(2, 1, True)
    return ((x1 * x1 + xi1 * xi1) * 0.3 + (x1 * xi2 - xi1 * x2) * 0.2
            + (x2 * x2 - xi2 * xi2) * 0.1 + x1 * xi1 * 0.07)


PERTURBATIONS = {"beat": beat_perturbation, "rotation": rotation_perturbation}


def orbit_symbol(q: PhasePolynomial) -> InvariantSymbol:
    """Descended principal symbol of the order-one operator built from q.

    The bidegree (1,1) part of the averaged quadratic, read on ``|z| = 1``.
    Constants are of lower order and are dropped.
    """
    zq = flow_average(kappa_pullback(q) if q.kind == REAL else q)
    top = {t: c for t, c in zq.terms.items() if sum(t[0]) == 1}
    clean = {}
    for t, c in top.items():
        c = complex(c)
        clean[t] = c.real if c.imag == 0 else c
    return descend(PhasePolynomial(COMPLEX, q.d, clean), 1)
