"""Toeplitz matrices on degree-N homogeneous polynomials.

Two inner products on the monomials ``z^g`` with ``|g| = N`` are available:

``"fs"``
    sphere pairing, ``<z^g, z^g> = (d-1)! g! / (N+d-1)!``, which is the level-N
    Fubini-Study pairing on CP^{d-1};
``"bf"``
    Gaussian (Bargmann-Fock) pairing, ``<z^g, z^g> = g!``.

Entries never form large factorials. Matrix elements reduce to short rising
products of occupation numbers, which stay exact in double precision for the
bidegrees used here.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Optional, Sequence, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import DegreeError
from .hermite import BlockOperator, multi_indices, oscillator_energy, rank
from .symbols import COMPLEX, InvariantSymbol, PhasePolynomial, descend

INNER_PRODUCTS = ("fs", "bf")


def dim(N: int, d: int) -> int:
    """Number of monomials of degree N in d variables."""
    if N < 0 or d < 1:
        raise ValueError("need N >= 0 and d >= 1")
    return comb(N + d - 1, d - 1)


def monomial_integral(gamma: Sequence[int], delta: Sequence[int], d: Optional[int] = None) -> Fraction:
    """Exact normalised sphere moment of ``z^gamma zbar^delta`` over S^{2d-1}.

    Raises
    ------
    DegreeError
        When ``|gamma| != |delta|``.
    """
    gamma, delta = tuple(gamma), tuple(delta)
    d = len(gamma) if d is None else d
    if len(gamma) != d or len(delta) != d:
        raise ValueError("multi-index length mismatch")
    if sum(gamma) != sum(delta):
        raise DegreeError("moments need |gamma| = |delta|")
    if gamma != delta:
        return Fraction(0)
    num = factorial(d - 1)
    for g in gamma:
        num *= factorial(g)
    return Fraction(num, factorial(sum(gamma) + d - 1))


def _rising(start: np.ndarray, count: int) -> np.ndarray:
    """``start (start+1) ... (start+count-1)`` elementwise, as float."""
    out = np.ones(len(start))
    for i in range(count):
        out *= start + i
    return out


@dataclass(frozen=True)
class ToeplitzBlock:
    """Compressed multiplication operator at level N.

    ``matrix[delta, gamma] = <H e_gamma, e_delta>`` in the orthonormalised
    monomial basis (lexicographic order, shared with the oscillator basis).
    """

    N: int
    H: object
    matrix: sp.csr_matrix
    inner: str = "fs"

    @property
    def d(self) -> int:
        return self.H.d

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def bandwidth(self) -> Optional[int]:
        """Half bandwidth for d <= 2."""
        if self.d > 2:
            return None
        M = self.matrix.tocoo()
        return int(np.max(np.abs(M.row - M.col))) if M.nnz else 0


def toeplitz(H: Union[InvariantSymbol, PhasePolynomial], N: int, inner: str = "fs") -> ToeplitzBlock:
    """Toeplitz compression of a symbol to degree-N polynomials.

    Parameters
    ----------
    H : InvariantSymbol or PhasePolynomial
        For ``inner="fs"`` the symbol is read as the order-zero function
        ``p / |z|^{2k}`` on CP^{d-1}. For ``inner="bf"`` the polynomial itself
        is compressed (mixed bidegrees allowed, but every term must have
        ``|alpha| = |beta|``).
    N : int
    inner : {"fs", "bf"}
    """
    if inner not in INNER_PRODUCTS:
        raise ValueError(f"unknown inner product {inner!r}")
    if isinstance(H, PhasePolynomial):
        if H.kind != COMPLEX:
            raise ValueError("toeplitz needs a complex-kind symbol")
        poly = H
        if inner == "fs":
            H = descend(H, 0)
            poly = H.polynomial()
    else:
        poly = H.polynomial()
    if not poly.is_invariant():
        raise DegreeError("Toeplitz compression needs |alpha| = |beta| in every term")
    d = poly.d
    src = np.array(multi_indices(N, d))
    n = len(src)
    cols_all = np.arange(n)
    rows, cols, vals = [], [], []
    for (a, b), c in sorted(poly.terms.items()):
        a_arr = np.array(a)
        b_arr = np.array(b)
        top = src + a_arr
        dst = top - b_arr
        ok = np.all(dst >= 0, axis=1)
        if not ok.any():
            continue
        g, dl = src[ok], dst[ok]
        # (g+a)!/g! and (g+a)!/delta! as rising products
        r1 = np.ones(len(g))
        r2 = np.ones(len(g))
        for j in range(d):
            r1 *= _rising(g[:, j] + 1.0, a[j])
            r2 *= _rising(dl[:, j] + 1.0, b[j])
        v = np.sqrt(r1 * r2)
        if inner == "fs":
            k = sum(a)
            v = v / _rising(np.array([N + d], dtype=float), k)[0]
        rows.append(rank(dl, N))
        cols.append(cols_all[ok])
        vals.append(complex(c) * v)
    if rows:
        M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    else:
        M = sp.csr_matrix((n, n), dtype=complex)
    return ToeplitzBlock(N, H, M, inner)


def hermitian_spectrum(M) -> np.ndarray:
    """Sorted eigenvalues of a Hermitian matrix, using a banded solver when it pays off."""
    if sp.issparse(M):
        n = M.shape[0]
        Mc = M.tocoo()
        bw = int(np.max(np.abs(Mc.row - Mc.col))) if Mc.nnz else 0
        if n > 64 and bw < n // 8:
            ab = np.zeros((bw + 1, n), dtype=complex)
            # lower banded storage: ab[i - j, j] = M[i, j] for i >= j
            low = Mc.row >= Mc.col
            np.add.at(ab, (Mc.row[low] - Mc.col[low], Mc.col[low]), Mc.data[low])
            if np.all(ab.imag == 0):
                ab = ab.real
            return np.sort(sla.eig_banded(ab, lower=True, eigvals_only=True))
        M = M.toarray()
    M = 0.5 * (M + M.conj().T)
    return np.linalg.eigvalsh(M)


def toeplitz_spectrum(T: ToeplitzBlock) -> np.ndarray:
    return hermitian_spectrum(T.matrix)


def block_propagator_trace(T: Union[ToeplitzBlock, np.ndarray], t: float, N: Optional[int] = None) -> complex:
    """``Tr exp(i t sqrt(N) T)`` from the eigenvalues, summed in ascending order.

    ``T`` may be a block or its precomputed sorted eigenvalues (then pass N).
    """
    if isinstance(T, ToeplitzBlock):
        mu = toeplitz_spectrum(T)
        N = T.N
    else:
        if N is None:
            raise ValueError("N is required with precomputed eigenvalues")
        mu = np.sort(np.asarray(T, dtype=float))
    return complex(np.sum(np.exp(1j * t * np.sqrt(N) * mu)))


def fs_average(H: InvariantSymbol) -> Fraction | float:
    """Average of H over CP^{d-1} against the FS volume."""
    tot = 0
    for (a, b), c in H.coefficients.items():
        if a == b:
            tot += c * monomial_integral(a, b, H.d)
    if isinstance(tot, complex):
        # diagonal coefficients of a Hermitian table are real
        return tot.real
    return tot


def cross_model_compare(B: BlockOperator, H1: InvariantSymbol, N: int) -> float:
    """Operator norm of ``B_N / sqrt(N + d/2) - T_N[H1]`` in the shared basis."""
    if B.d != H1.d:
        raise ValueError("dimension mismatch")
    blk = B.block(N, dense=False)
    T = toeplitz(H1, N).matrix
    if blk.shape != T.shape:
        raise ValueError(f"basis size mismatch {blk.shape} vs {T.shape}")
    diff = sp.csr_matrix(blk) * oscillator_energy(N, B.d) ** -0.5 - T
    ev = hermitian_spectrum(diff)
    return float(np.max(np.abs(ev))) if len(ev) else 0.0
