"""Exact algebra of polynomial phase-space symbols.

Two variable kinds are supported:

``"real"``
    polynomials in (x, xi) in R^{2d}; a term ``(alpha, beta)`` is x^alpha xi^beta.
``"complex"``
    polynomials in (z, zbar) in C^d; a term ``(alpha, beta)`` is z^alpha zbar^beta.

The two are related by the complex canonical map
``z = (x - i xi)/sqrt(2)``, under which ``p2 = (|x|^2 + |xi|^2)/2`` becomes
``|z|^2`` and the harmonic-oscillator flow becomes the rotation ``z -> e^{it} z``.

Coefficients may be ``int``, ``fractions.Fraction``, ``float`` or ``complex``.
The Laplacian and the heat flows only multiply by rationals, so rational input
stays rational.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from .errors import DegreeError, VariableKindError

MultiIndex = Tuple[int, ...]
Term = Tuple[MultiIndex, MultiIndex]

REAL = "real"
COMPLEX = "complex"

UNIT_TOL = 1e-12


def _is_zero(c) -> bool:
    return c == 0


def _conj(c):
    if isinstance(c, (int, Fraction)):
        return c
    return c.conjugate()


def _add_into(terms: Dict[Term, Number], key: Term, c) -> None:
    if _is_zero(c):
        return
    s = terms.get(key, 0) + c
    if _is_zero(s):
        terms.pop(key, None)
    else:
        terms[key] = s


def _mul_i_power(c, m: int):
    """Return c * i**m, keeping exact types when the result is real."""
    m %= 4
    if m == 0:
        return c
    if m == 2:
        return -c
    if isinstance(c, complex):
        return c * (1j if m == 1 else -1j)
    cc = complex(c)
    return cc * (1j if m == 1 else -1j)


def _add_idx(a: MultiIndex, b: MultiIndex) -> MultiIndex:
    return tuple(x + y for x, y in zip(a, b))


@dataclass(frozen=True, eq=False)
class PhasePolynomial:
    """Finite sum of monomials with complex coefficients.

    Parameters
    ----------
    kind : {"real", "complex"}
        Variable kind; see the module docstring.
    d : int
        Configuration dimension (number of x's, or of z's).
    terms : mapping
        ``{(alpha, beta): coefficient}``. Zero coefficients are dropped.
    """

    kind: str
    d: int
    terms: Mapping[Term, Number] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (REAL, COMPLEX):
            raise ValueError(f"unknown variable kind {self.kind!r}")
        if self.d < 1:
            raise ValueError("dimension must be positive")
        clean: Dict[Term, Number] = {}
        for (a, b), c in dict(self.terms).items():
            a = tuple(int(v) for v in a)
            b = tuple(int(v) for v in b)
            if len(a) != self.d or len(b) != self.d:
                raise ValueError(f"multi-index length mismatch for term {(a, b)} (d={self.d})")
            if min(a + b) < 0:
                raise ValueError("negative exponent")
            _add_into(clean, (a, b), c)
        object.__setattr__(self, "terms", clean)

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, kind: str, d: int) -> "PhasePolynomial":
        return cls(kind, d, {})

    @classmethod
    def constant(cls, kind: str, d: int, c) -> "PhasePolynomial":
        z = (0,) * d
        return cls(kind, d, {(z, z): c})

    @classmethod
    def monomial(cls, kind: str, alpha: Iterable[int], beta: Iterable[int], c=1) -> "PhasePolynomial":
        alpha, beta = tuple(alpha), tuple(beta)
        return cls(kind, len(alpha), {(alpha, beta): c})

    @classmethod
    def variable(cls, kind: str, d: int, j: int, conjugate: bool = False, c=1) -> "PhasePolynomial":
        """``z_j`` / ``zbar_j`` (complex kind) or ``x_j`` / ``xi_j`` (real kind)."""
        e = tuple(1 if i == j else 0 for i in range(d))
        z = (0,) * d
        return cls(kind, d, {((z, e) if conjugate else (e, z)): c})

    @classmethod
    def p2(cls, kind: str, d: int) -> "PhasePolynomial":
        """Harmonic oscillator symbol: (|x|^2+|xi|^2)/2, or |z|^2."""
        t = {}
        for j in range(d):
            e = tuple(2 if i == j else 0 for i in range(d))
            u = tuple(1 if i == j else 0 for i in range(d))
            z = (0,) * d
            if kind == REAL:
                t[(e, z)] = Fraction(1, 2)
                t[(z, e)] = Fraction(1, 2)
            else:
                t[(u, u)] = 1
        return cls(kind, d, t)

    # -- arithmetic -------------------------------------------------------

    def _check_compatible(self, other: "PhasePolynomial"):
        if other.kind != self.kind:
            raise VariableKindError(f"cannot combine {self.kind} and {other.kind} polynomials")
        if other.d != self.d:
            raise ValueError("dimension mismatch")

    def _coerce(self, other) -> "PhasePolynomial":
        if isinstance(other, PhasePolynomial):
            self._check_compatible(other)
            return other
        if isinstance(other, Number):
            return PhasePolynomial.constant(self.kind, self.d, other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        t = dict(self.terms)
        for k, c in other.terms.items():
            _add_into(t, k, c)
        return PhasePolynomial(self.kind, self.d, t)

    __radd__ = __add__

    def __neg__(self):
        return PhasePolynomial(self.kind, self.d, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return PhasePolynomial(self.kind, self.d, {k: c * other for k, c in self.terms.items()})
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        self._check_compatible(other)
        t: Dict[Term, Number] = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                _add_into(t, (_add_idx(a1, a2), _add_idx(b1, b2)), c1 * c2)
        return PhasePolynomial(self.kind, self.d, t)

    def __rmul__(self, other):
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def __pow__(self, n: int):
        out = PhasePolynomial.constant(self.kind, self.d, 1)
        for _ in range(int(n)):
            out = out * self
        return out

    def __eq__(self, other):
        if not isinstance(other, PhasePolynomial):
            return NotImplemented
        return self.kind == other.kind and self.d == other.d and self.terms == other.terms

    def __repr__(self):
        return f"PhasePolynomial({self.kind!r}, d={self.d}, {len(self.terms)} terms)"

    # -- structure --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(a) + sum(b) for a, b in self.terms), default=0)

    def bidegrees(self) -> set:
        return {(sum(a), sum(b)) for a, b in self.terms}

    def is_invariant(self) -> bool:
        """True when every term has |alpha| = |beta| (complex kind only)."""
        return all(sum(a) == sum(b) for a, b in self.terms)

    def conjugate(self) -> "PhasePolynomial":
        """Complex conjugate of the represented function."""
        if self.kind == REAL:
            return PhasePolynomial(REAL, self.d, {k: _conj(c) for k, c in self.terms.items()})
        return PhasePolynomial(COMPLEX, self.d, {(b, a): _conj(c) for (a, b), c in self.terms.items()})

    def is_real(self, tol: float = 0.0) -> bool:
        diff = self - self.conjugate()
        return all(abs(c) <= tol for c in diff.terms.values())

    def coefficient_scale(self) -> float:
        return float(sum(abs(c) for c in self.terms.values()))

    def derivative(self, j: int, conjugate: bool = False) -> "PhasePolynomial":
        """Partial derivative in z_j (or zbar_j); in x_j (or xi_j) for the real kind."""
        t: Dict[Term, Number] = {}
        for (a, b), c in self.terms.items():
            e = b if conjugate else a
            if e[j] == 0:
                continue
            e2 = tuple(v - (1 if i == j else 0) for i, v in enumerate(e))
            key = (a, e2) if conjugate else (e2, b)
            _add_into(t, key, c * e[j])
        return PhasePolynomial(self.kind, self.d, t)

    def laplacian(self) -> "PhasePolynomial":
        """Euclidean Laplacian on R^{2d}; equals 4 sum_j d_{z_j} d_{zbar_j} in complex variables."""
        out = PhasePolynomial.zero(self.kind, self.d)
        for j in range(self.d):
            if self.kind == COMPLEX:
                out = out + self.derivative(j).derivative(j, conjugate=True) * 4
            else:
                out = out + self.derivative(j).derivative(j) + self.derivative(j, True).derivative(j, True)
        return out

    # -- evaluation -------------------------------------------------------

    def compile(self):
        """Exponent arrays and complex coefficients for vectorised evaluation."""
        if not self.terms:
            z = np.zeros((0, self.d), dtype=np.int64)
            return z, z.copy(), np.zeros(0, dtype=complex)
        keys = list(self.terms)
        A = np.array([k[0] for k in keys], dtype=np.int64)
        B = np.array([k[1] for k in keys], dtype=np.int64)
        c = np.array([complex(self.terms[k]) for k in keys])
        return A, B, c

    def __call__(self, u, v=None):
        """Evaluate at points.

        For the complex kind pass ``z`` with shape ``(..., d)``; ``zbar`` is
        taken as its conjugate unless ``v`` is given. For the real kind pass
        ``x`` and ``xi``.
        """
        A, B, c = self.compile()
        u = np.asarray(u, dtype=complex)
        if self.kind == COMPLEX:
            v = np.conj(u) if v is None else np.asarray(v, dtype=complex)
        elif v is None:
            raise TypeError("real-kind evaluation needs both x and xi")
        else:
            v = np.asarray(v, dtype=complex)
        return _eval_compiled(A, B, c, u, v)


def _eval_compiled(A, B, c, u, v):
    if len(c) == 0:
        return np.zeros(u.shape[:-1], dtype=complex)
    pu = np.prod(u[..., None, :] ** A, axis=-1)
    pv = np.prod(v[..., None, :] ** B, axis=-1)
    return np.sum(c * pu * pv, axis=-1)


# ---------------------------------------------------------------------------
# operations


def flow_average(p: PhasePolynomial) -> PhasePolynomial:
    """Average over one period of the harmonic-oscillator flow.

    In complex variables the flow is a rotation of z, so the average keeps
    exactly the terms with |alpha| = |beta|.
    """
    if p.kind != COMPLEX:
        raise VariableKindError("flow_average needs a complex-kind polynomial; apply kappa_pullback first")
    return PhasePolynomial(COMPLEX, p.d, {k: c for k, c in p.terms.items() if sum(k[0]) == sum(k[1])})


def kappa_pullback(p: PhasePolynomial) -> PhasePolynomial:
    """Rewrite a (x, xi) polynomial in (z, zbar) on the totally real subspace.

    Substitutes ``x = (z + zbar)/sqrt(2)`` and ``xi = i (z - zbar)/sqrt(2)``,
    the inverse of ``z = (x - i xi)/sqrt(2)``. Degrees are preserved and
    ``p2`` maps to ``|z|^2``.
    """
    if p.kind != REAL:
        raise VariableKindError("kappa_pullback needs a real-kind polynomial")
    d = p.d
    zero = (0,) * d

    def unit(j):
        return tuple(1 if i == j else 0 for i in range(d))

    # integer linear forms z_j + zbar_j and z_j - zbar_j
    plus = [PhasePolynomial(COMPLEX, d, {(unit(j), zero): 1, (zero, unit(j)): 1}) for j in range(d)]
    minus = [PhasePolynomial(COMPLEX, d, {(unit(j), zero): 1, (zero, unit(j)): -1}) for j in range(d)]
    out = PhasePolynomial.zero(COMPLEX, d)
    for (a, b), c in p.terms.items():
        mono = PhasePolynomial.constant(COMPLEX, d, 1)
        for j in range(d):
            mono = mono * (plus[j] ** a[j]) * (minus[j] ** b[j])
        deg = sum(a) + sum(b)
        if deg % 2 == 0:
            scale = Fraction(1, 2 ** (deg // 2))
        else:
            scale = 2.0 ** (-deg / 2)
        cc = _mul_i_power(c * scale, sum(b))
        out = out + mono * cc
    return out


def z_to_real(z) -> Tuple[np.ndarray, np.ndarray]:
    """Map points of C^d back to (x, xi) on the real phase space."""
    z = np.asarray(z, dtype=complex)
    x = np.sqrt(2.0) * z.real
    xi = -np.sqrt(2.0) * z.imag
    return x, xi


def real_to_z(x, xi) -> np.ndarray:
    return (np.asarray(x) - 1j * np.asarray(xi)) / np.sqrt(2.0)


def _heat_series(a: PhasePolynomial, sign: int) -> PhasePolynomial:
    out = PhasePolynomial.zero(a.kind, a.d)
    term = a
    m = 0
    while not term.is_zero():
        coef = Fraction(sign ** m, 8 ** m * math.factorial(m))
        out = out + term * coef
        term = term.laplacian()
        m += 1
    return out


def berezin_forward(a: PhasePolynomial) -> PhasePolynomial:
    """Apply ``exp(-Laplacian/8)``: Weyl symbol to contravariant (anti-Wick) symbol.

    The series terminates because the Laplacian lowers the degree by two.
    """
    if a.kind != COMPLEX:
        raise VariableKindError("berezin_forward acts on complex-kind polynomials")
    return _heat_series(a, -1)


def berezin_inverse(q: PhasePolynomial) -> PhasePolynomial:
    """Apply ``exp(+Laplacian/8)``, the inverse of :func:`berezin_forward`."""
    if q.kind != COMPLEX:
        raise VariableKindError("berezin_inverse acts on complex-kind polynomials")
    return _heat_series(q, +1)


def norm_squared_power(d: int, k: int) -> PhasePolynomial:
    """|z|^{2k} expanded as a polynomial."""
    return PhasePolynomial.p2(COMPLEX, d) ** k


def substitute_unitary(p: PhasePolynomial, A) -> PhasePolynomial:
    """Return the polynomial ``z -> p(A z)`` (with ``zbar -> conj(A) zbar``)."""
    if p.kind != COMPLEX:
        raise VariableKindError("unitary substitution is defined for complex-kind polynomials")
    A = np.asarray(A, dtype=complex)
    d = p.d
    zero = (0,) * d

    def unit(j):
        return tuple(1 if i == j else 0 for i in range(d))

    lin = [PhasePolynomial(COMPLEX, d, {(unit(l), zero): complex(A[j, l]) for l in range(d)}) for j in range(d)]
    lin_bar = [PhasePolynomial(COMPLEX, d, {(zero, unit(l)): complex(np.conj(A[j, l])) for l in range(d)}) for j in range(d)]
    out = PhasePolynomial.zero(COMPLEX, d)
    for (a, b), c in p.terms.items():
        mono = PhasePolynomial.constant(COMPLEX, d, c)
        for j in range(d):
            mono = mono * (lin[j] ** a[j]) * (lin_bar[j] ** b[j])
        out = out + mono
    return out


# ---------------------------------------------------------------------------
# invariant symbols on CP^{d-1}


@dataclass(frozen=True, eq=False)
class InvariantSymbol:
    """Flow-invariant function on CP^{d-1} given by a bihomogeneous table.

    Represents ``H(z) = sum c_{ab} z^a zbar^b / |z|^{2k}`` with
    ``|a| = |b| = k``; on the unit sphere the denominator is 1.

    ``isotropic_order`` records how the function sits in phase space:
    0 means the ambient symbol is H itself (homogeneous of degree 0), 1 means
    the ambient symbol is ``|z| H``, which agrees with H on ``|z| = 1``.
    """

    d: int
    k: int
    coefficients: Mapping[Term, Number]
    isotropic_order: int = 0

    def __post_init__(self):
        if self.isotropic_order not in (0, 1):
            raise ValueError("isotropic_order must be 0 or 1")
        if self.k < 1:
            raise DegreeError("bidegree must be a positive integer")
        poly = PhasePolynomial(COMPLEX, self.d, self.coefficients)
        for a, b in poly.terms:
            if sum(a) != self.k or sum(b) != self.k:
                raise DegreeError(f"term {(a, b)} is not of bidegree ({self.k},{self.k})")
        scale = max(poly.coefficient_scale(), 1e-300)
        if not poly.is_real(tol=1e-12 * scale):
            raise ValueError("coefficient table is not Hermitian")
        object.__setattr__(self, "coefficients", dict(poly.terms))

    @classmethod
    def from_hermitian(cls, C, isotropic_order: int = 0) -> "InvariantSymbol":
        """Bidegree (1,1) symbol ``sum_ij C_ij z_i zbar_j``."""
        C = np.asarray(C, dtype=complex)
        d = C.shape[0]
        t = {}
        for i in range(d):
            for j in range(d):
                if C[i, j] != 0:
                    ei = tuple(1 if m == i else 0 for m in range(d))
                    ej = tuple(1 if m == j else 0 for m in range(d))
                    t[(ei, ej)] = complex(C[i, j]) if np.iscomplexobj(C[i, j]) and C[i, j].imag else float(C[i, j].real)
        return cls(d, 1, t, isotropic_order)

    def polynomial(self) -> PhasePolynomial:
        return PhasePolynomial(COMPLEX, self.d, self.coefficients)

    def coefficient_scale(self) -> float:
        return self.polynomial().coefficient_scale()

    def hermitian_matrix(self) -> np.ndarray:
        """Matrix ``C`` with ``C_ij`` the coefficient of ``z_i zbar_j`` (bidegree 1 only)."""
        if self.k != 1:
            raise DegreeError("hermitian_matrix needs bidegree (1,1)")
        C = np.zeros((self.d, self.d), dtype=complex)
        for (a, b), c in self.coefficients.items():
            C[a.index(1), b.index(1)] = complex(c)
        return C

    def raise_degree(self, k: int) -> "InvariantSymbol":
        """Same function on the sphere, written with bidegree k >= self.k."""
        if k < self.k:
            raise DegreeError("cannot lower the bidegree")
        p = self.polynomial() * norm_squared_power(self.d, k - self.k)
        return InvariantSymbol(self.d, k, p.terms, self.isotropic_order)

    def __add__(self, other):
        if isinstance(other, Number):
            k = self.k
            p = self.polynomial() + norm_squared_power(self.d, k) * other
            return InvariantSymbol(self.d, k, p.terms, self.isotropic_order)
        if not isinstance(other, InvariantSymbol):
            return NotImplemented
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        k = max(self.k, other.k)
        p = self.raise_degree(k).polynomial() + other.raise_degree(k).polynomial()
        return InvariantSymbol(self.d, k, p.terms, self.isotropic_order)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Number):
            if isinstance(other, complex) and other.imag != 0:
                raise ValueError("symbols are real; complex scaling is not allowed")
            return InvariantSymbol(self.d, self.k, {t: c * other for t, c in self.coefficients.items()}, self.isotropic_order)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def rotate(self, U) -> "InvariantSymbol":
        """Rotated copy ``H'`` with ``H'(U z) = H(z)``."""
        U = np.asarray(U, dtype=complex)
        p = substitute_unitary(self.polynomial(), U.conj().T)
        # drop rounding residue below the coefficient scale
        scale = max(self.coefficient_scale(), 1e-300)
        t = {k: c for k, c in p.terms.items() if abs(c) > 1e-15 * scale}
        t = _hermitize(t)
        return InvariantSymbol(self.d, self.k, t, self.isotropic_order)

    def __call__(self, z):
        return evaluate(self, z)

    def __repr__(self):
        return f"InvariantSymbol(d={self.d}, k={self.k}, {len(self.coefficients)} terms, order={self.isotropic_order})"


def _hermitize(t: Dict[Term, Number]) -> Dict[Term, Number]:
    """Symmetrise a nearly Hermitian table: c_ab <- (c_ab + conj c_ba)/2."""
    out = {}
    for (a, b), c in t.items():
        cb = t.get((b, a), 0)
        v = (complex(c) + complex(cb).conjugate()) / 2
        if v.imag == 0:
            v = v.real
        if v != 0:
            out[(a, b)] = v
    return out


def descend(p: PhasePolynomial, order: int) -> InvariantSymbol:
    """Descend an S^1-invariant bihomogeneous polynomial to CP^{d-1}.

    A constant is promoted to bidegree (1,1) by multiplying with |z|^2; this
    leaves the values on the unit sphere unchanged.
    """
    if p.kind != COMPLEX:
        raise VariableKindError("descend needs a complex-kind polynomial")
    if not p.is_invariant():
        raise DegreeError("polynomial is not invariant under the oscillator flow")
    degs = p.bidegrees()
    if len(degs) > 1:
        raise DegreeError(f"mixed bidegrees {sorted(degs)}; descend needs a single (k,k)")
    k = next(iter(degs))[0] if degs else 1
    if k == 0:
        p = p * norm_squared_power(p.d, 1)
        k = 1
    return InvariantSymbol(p.d, k, p.terms, order)


def evaluate(H: InvariantSymbol, z) -> float | np.ndarray:
    """Value of H at unit vector(s) z; the imaginary rounding residue is discarded."""
    z = np.asarray(z, dtype=complex)
    norms = np.linalg.norm(z, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise ValueError("evaluate needs unit vectors (|z| = 1 within 1e-12)")
    A, B, c = H.polynomial().compile()
    val = _eval_compiled(A, B, c, z, np.conj(z))
    val = np.real(val)
    if val.ndim == 0:
        return float(val)
    return val


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    X = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(X)
    ph = np.diag(R) / np.abs(np.diag(R))
    return Q * ph


def monomials(N: int, d: int):
    """All multi-indices of length d summing to N, lexicographically ascending."""
    out = []
    for c in itertools.combinations(range(N + d - 1), d - 1):
        prev = -1
        idx = []
        for pos in c:
            idx.append(pos - prev - 1)
            prev = pos
        idx.append(N + d - 2 - prev)
        out.append(tuple(idx))
    out.sort()
    return out
