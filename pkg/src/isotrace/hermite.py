"""Oscillator-basis matrices: H0, Weyl-quantised quadratics, order-one
perturbations and their exact energy-block averages.

Basis convention
----------------
Level N is spanned by occupation vectors ``n`` with ``|n| = N``, taken in
ascending lexicographic order. For ``d = 2`` this is ``(0, N), (1, N-1), ...``.
Under the Bargmann transform ``n`` corresponds to the monomial ``z^n``, so the
same ordering is used by :mod:`isotrace.fock`.

Matrices follow ``M[row, col] = <e_row, A e_col>``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import DegreeError
from .symbols import REAL, PhasePolynomial, kappa_pullback


# ---------------------------------------------------------------------------
# basis


def level_dim(N: int, d: int) -> int:
    return comb(N + d - 1, d - 1)


@lru_cache(maxsize=512)
def _multi_indices_cached(N: int, d: int) -> np.ndarray:
    if d == 1:
        out = np.array([[N]], dtype=np.int64)
    elif d == 2:
        n1 = np.arange(N + 1, dtype=np.int64)
        out = np.column_stack([n1, N - n1])
    else:
        parts = []
        for n1 in range(N + 1):
            rest = _multi_indices_cached(N - n1, d - 1)
            parts.append(np.column_stack([np.full(len(rest), n1, dtype=np.int64), rest]))
        out = np.vstack(parts)
    out.setflags(write=False)
    return out


def multi_indices(N: int, d: int) -> np.ndarray:
    """Occupation vectors of level N as a read-only ``(dim, d)`` array, lexicographic."""
    if N < 0 or d < 1:
        raise ValueError("need N >= 0 and d >= 1")
    if d > 2 and level_dim(N, d) > 2_000_000:
        raise MemoryError("level too large to enumerate")
    if d == 2 and N > 4096:
        n1 = np.arange(N + 1, dtype=np.int64)
        return np.column_stack([n1, N - n1])
    return _multi_indices_cached(N, d)


def _keys(idx: np.ndarray, base: int) -> np.ndarray:
    """Integer keys whose order matches the lexicographic order of the rows."""
    key = np.zeros(len(idx), dtype=np.int64)
    for j in range(idx.shape[1]):
        key = key * base + idx[:, j]
    return key


def rank(idx: np.ndarray, N: int) -> np.ndarray:
    """Position of each occupation vector (rows of ``idx``, all of level N) in the basis."""
    ref = multi_indices(N, idx.shape[1])
    base = N + 1
    pos = np.searchsorted(_keys(ref, base), _keys(idx, base))
    return pos


# ---------------------------------------------------------------------------
# normal-ordered quadratic operators

# term: (coefficient, creation indices, annihilation indices)
LadderTerm = Tuple[complex, Tuple[int, ...], Tuple[int, ...]]


def weyl_to_ladder(p: PhasePolynomial) -> List[LadderTerm]:
    """Normal-ordered form of the Weyl quantisation of a degree <= 2 polynomial.

    ``z_j`` becomes ``a_j^dagger`` and ``zbar_j`` becomes ``a_j``. Symmetric
    ordering adds ``1/2`` for each ``z_j zbar_j``.
    """
    if p.kind == REAL:
        p = kappa_pullback(p)
    if p.degree() > 2:
        raise DegreeError(f"Weyl quantisation is implemented up to degree 2 (got {p.degree()})")
    terms: List[LadderTerm] = []
    for (a, b), c in sorted(p.terms.items()):
        cre = tuple(j for j in range(p.d) for _ in range(a[j]))
        ann = tuple(j for j in range(p.d) for _ in range(b[j]))
        terms.append((complex(c), cre, ann))
        if len(cre) == 1 and len(ann) == 1 and cre == ann:
            terms.append((complex(c) / 2, (), ()))
    return terms


def _apply_term(term: LadderTerm, src: np.ndarray):
    """Apply one ladder monomial to basis vectors; returns (targets, amplitudes, valid)."""
    c, cre, ann = term
    occ = src.copy()
    amp = np.full(len(src), c, dtype=complex)
    for j in ann:
        amp = amp * np.sqrt(np.maximum(occ[:, j], 0).astype(float))
        occ[:, j] -= 1
    valid = np.all(occ >= 0, axis=1)
    for j in cre:
        occ[:, j] += 1
        amp = amp * np.sqrt(np.maximum(occ[:, j], 0).astype(float))
    valid &= amp != 0
    return occ, amp, valid


def _ladder_block(terms: Iterable[LadderTerm], d: int, n_out: int, n_in: int) -> sp.csr_matrix:
    src = multi_indices(n_in, d)
    rows, cols, vals = [], [], []
    col_all = np.arange(len(src))
    for term in terms:
        if len(term[1]) - len(term[2]) != n_out - n_in:
            continue
        occ, amp, ok = _apply_term(term, np.array(src))
        if not ok.any():
            continue
        rows.append(rank(occ[ok], n_out))
        cols.append(col_all[ok])
        vals.append(amp[ok])
    shape = (level_dim(n_out, d), level_dim(n_in, d))
    if not rows:
        return sp.csr_matrix(shape, dtype=complex)
    M = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    return M.tocsr()


def oscillator_energy(N: int, d: int) -> float:
    return N + d / 2


@dataclass(frozen=True)
class LevelOperator:
    """Operator on oscillator levels given by a normal-ordered quadratic.

    ``weight`` selects how level energies enter:

    ``"unit"``
        the operator is the ladder polynomial ``Q`` itself;
    ``"inv_sqrt"``
        the operator is ``(H0^{-1/2} Q + Q H0^{-1/2}) / 2``.
    """

    d: int
    terms: Tuple[LadderTerm, ...]
    weight: str = "unit"
    n_max: Optional[int] = None

    def shifts(self) -> List[int]:
        return sorted({len(c) - len(a) for _, c, a in self.terms})

    def level_weight(self, n_out: int, n_in: int) -> float:
        if self.weight == "unit":
            return 1.0
        e_out = oscillator_energy(n_out, self.d)
        e_in = oscillator_energy(n_in, self.d)
        return 0.5 * (e_out ** -0.5 + e_in ** -0.5)

    def block(self, n_out: int, n_in: int) -> sp.csr_matrix:
        """Sparse matrix of the component mapping level ``n_in`` to ``n_out``."""
        if n_out < 0 or n_in < 0:
            raise ValueError("negative level")
        M = _ladder_block(self.terms, self.d, n_out, n_in)
        w = self.level_weight(n_out, n_in)
        return M * w if w != 1.0 else M

    def matrix(self, n_max: Optional[int] = None) -> sp.csr_matrix:
        """Full sparse matrix on the direct sum of levels ``0..n_max``."""
        n_max = self.n_max if n_max is None else n_max
        if n_max is None:
            raise ValueError("n_max required")
        grid = [[None] * (n_max + 1) for _ in range(n_max + 1)]
        for N in range(n_max + 1):
            for s in self.shifts():
                M = N + s
                if 0 <= M <= n_max:
                    grid[M][N] = self.block(M, N)
            if grid[N][N] is None:
                n = level_dim(N, self.d)
                grid[N][N] = sp.csr_matrix((n, n), dtype=complex)
        return sp.bmat(grid, format="csr")

    def diagonal_generator(self):
        """``(C, c0)`` with the level-preserving part equal to ``dGamma(C) + c0``."""
        C = np.zeros((self.d, self.d), dtype=complex)
        c0 = 0j
        for c, cre, ann in self.terms:
            if len(cre) == 1 and len(ann) == 1:
                C[cre[0], ann[0]] += c
            elif not cre and not ann:
                c0 += c
            elif len(cre) == len(ann):
                raise DegreeError("unexpected level-preserving term")
        return C, c0


def quantize_weyl_quadratic(q: PhasePolynomial, d: Optional[int] = None,
                            n_max: Optional[int] = None) -> LevelOperator:
    """Weyl quantisation of a real polynomial of degree at most 2.

    Raises
    ------
    DegreeError
        Degree above 2.
    """
    if d is not None and q.d != d:
        raise ValueError("dimension mismatch")
    return LevelOperator(q.d, tuple(weyl_to_ladder(q)), "unit", n_max)


def make_order1_perturbation(q: PhasePolynomial, d: Optional[int] = None,
                             n_max: Optional[int] = None) -> LevelOperator:
    """``P = (H0^{-1/2} Op(q) + Op(q) H0^{-1/2}) / 2``, self-adjoint of order one."""
    Q = quantize_weyl_quadratic(q, d, n_max)
    return LevelOperator(Q.d, Q.terms, "inv_sqrt", n_max)


# ---------------------------------------------------------------------------
# block operators


@dataclass(frozen=True)
class ModeForm:
    """Closed form ``nu = s(N) (sum_j w_j n_j + c0) + shift(N)`` of a block spectrum.

    ``s(N)`` is 1 or ``(N + d/2)^{-1/2}``; the shift is 0 or ``N + d/2``.
    """

    w: np.ndarray
    c0: float
    weight: str = "unit"
    add_energy: bool = False

    def eigenvalues(self, N: int, d: int) -> np.ndarray:
        n = multi_indices(N, d)
        vals = n @ self.w + self.c0
        if self.weight == "inv_sqrt":
            vals = vals * oscillator_energy(N, d) ** -0.5
        if self.add_energy:
            vals = vals + oscillator_energy(N, d)
        return np.sort(vals)

    def bound(self, N, d: int):
        """Spectral radius bound of block N (scalar or array of levels)."""
        N = np.asarray(N, dtype=float)
        wmax = float(np.max(np.abs(self.w))) if len(self.w) else 0.0
        b = N * wmax + abs(self.c0)
        if self.weight == "inv_sqrt":
            b = b * (N + d / 2) ** -0.5
        if self.add_energy:
            b = b + N + d / 2
        return b if b.ndim else float(b)


@dataclass
class BlockOperator:
    """Level-indexed family of Hermitian blocks.

    Parameters
    ----------
    d, n_max : int
    blocks : callable or dict
        ``N -> (dim, dim)`` array (dense or sparse).
    modes : ModeForm, optional
        Closed-form spectrum when the blocks come from a quadratic generator.
    """

    d: int
    n_max: int
    blocks: object
    modes: Optional[ModeForm] = None
    label: str = ""
    _cache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def block(self, N: int, dense: bool = True):
        if not 0 <= N <= self.n_max:
            raise IndexError(f"level {N} outside 0..{self.n_max}")
        if isinstance(self.blocks, dict):
            M = self.blocks[N]
        else:
            M = self.blocks(N)
        if dense and sp.issparse(M):
            M = M.toarray()
        return M

    def norm_bound(self, N: int) -> float:
        """Upper bound for the spectral radius of block N."""
        if self.modes is not None:
            return self.modes.bound(N, self.d)
        M = self.block(N, dense=False)
        if sp.issparse(M):
            return float(abs(M).sum(axis=1).max()) if M.nnz else 0.0
        return float(np.linalg.norm(M, 2))

    def is_hermitian(self, N: int, rtol: float = 1e-12) -> bool:
        M = self.block(N)
        scale = max(np.abs(M).max(), 1e-300)
        return bool(np.abs(M - M.conj().T).max() <= rtol * scale)


def build_H0(d: int, n_max: int) -> BlockOperator:
    """Blocks ``(N + d/2) Id``."""
    if d < 1 or n_max < 0:
        raise ValueError("need d >= 1 and n_max >= 0")

    def blk(N):
        return sp.identity(level_dim(N, d), dtype=complex, format="csr") * oscillator_energy(N, d)

    return BlockOperator(d, n_max, blk, ModeForm(np.zeros(d), 0.0, "unit", True), "H0")


def average_operator(P: LevelOperator, n_max: Optional[int] = None) -> BlockOperator:
    """Energy-block-diagonal part ``Pi_N P Pi_N`` of a level operator.

    Averaging over the free evolution kills every matrix element between
    different levels, so this is the exact average.
    """
    n_max = P.n_max if n_max is None else n_max
    if n_max is None:
        raise ValueError("n_max required")
    C, c0 = P.diagonal_generator()
    modes = None
    if np.allclose(C, C.conj().T, atol=1e-14) and abs(c0.imag) < 1e-14:
        w = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
        modes = ModeForm(w, float(c0.real), P.weight, False)

    def blk(N):
        return P.block(N, N)

    return BlockOperator(P.d, n_max, blk, modes, "average")


def average_matrix(M: sp.spmatrix, d: int, n_max: int) -> sp.csr_matrix:
    """Keep only the level-diagonal blocks of an explicit matrix on levels ``0..n_max``."""
    offs = np.cumsum([0] + [level_dim(N, d) for N in range(n_max + 1)])
    M = sp.coo_matrix(M)
    lvl = np.searchsorted(offs, np.arange(offs[-1]), side="right") - 1
    keep = lvl[M.row] == lvl[M.col]
    return sp.csr_matrix((M.data[keep], (M.row[keep], M.col[keep])), shape=M.shape)


def h0_matrix(d: int, n_max: int) -> sp.csr_matrix:
    diag = np.concatenate([np.full(level_dim(N, d), oscillator_energy(N, d)) for N in range(n_max + 1)])
    return sp.diags(diag).tocsr()


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectrumBlock:
    N: int
    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        object.__setattr__(self, "eigenvalues", ev)


def block_spectrum(B: BlockOperator, N: int, method: str = "auto") -> SpectrumBlock:
    """Sorted eigenvalues of block N.

    ``method="modes"`` uses the closed normal-mode form (exact for quadratic
    generators and fast at any N); ``"eigh"`` runs LAPACK on the dense block.
    ``"auto"`` prefers the closed form when it exists.
    """
    if method not in ("auto", "modes", "eigh"):
        raise ValueError(f"unknown method {method!r}")
    if not 0 <= N <= B.n_max:
        raise IndexError(f"level {N} outside 0..{B.n_max}")
    if method == "modes" or (method == "auto" and B.modes is not None):
        if B.modes is None:
            raise ValueError("block operator has no closed-form spectrum")
        return SpectrumBlock(N, B.modes.eigenvalues(N, B.d))
    M = B.block(N)
    M = 0.5 * (M + M.conj().T)
    return SpectrumBlock(N, np.linalg.eigvalsh(M))


def map_levels(fn: Callable[[int], object], levels: Iterable[int], threads: int = 1) -> Dict[int, object]:
    """Apply ``fn`` to each level; the result is keyed and ordered by level."""
    levels = sorted(set(int(N) for N in levels))
    if threads <= 1:
        return {N: fn(N) for N in levels}
    with ThreadPoolExecutor(max_workers=threads) as ex:
        res = list(ex.map(fn, levels))
    return dict(zip(levels, res))
