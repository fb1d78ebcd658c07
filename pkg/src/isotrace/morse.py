"""Critical points of invariant symbols on CP^{d-1} and their Hessian data.

Derivatives are analytic. The coefficient table is differentiated exactly and
the quotient by ``|z|^{2k}`` is handled with the product rule. Second
derivatives are then pulled back to the affine chart ``w -> z + V w``, where
the columns of ``V`` span the Hermitian complement of ``z``.

Metric normalisations
---------------------
``"kahler"``
    Fubini-Study metric scaled so that the total volume of CP^m is
    ``(2 pi)^m / m!``. At the chart origin it reads ``2 |dw|^2``.
``"round"``
    Standard Fubini-Study metric (volume ``pi^m / m!``), ``|dw|^2`` at the origin.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from .errors import IncompleteSearchError, NotMorseError
from .symbols import InvariantSymbol, _eval_compiled

FS_NORMALIZATIONS = {"kahler": 0.5, "round": 1.0}

GRAD_TOL = 1e-10
MORSE_TOL = 1e-8
DEDUP_TOL = 1e-6


@dataclass(frozen=True)
class CriticalPointData:
    """One non-degenerate critical point.

    Attributes
    ----------
    point : ndarray
        Unit representative in C^d, phase-normalised so the largest
        component is real and positive.
    value : float
        Symbol value at the point.
    hess_det : float
        Absolute determinant of the real Hessian in an orthonormal frame.
    signature : int
        Positive minus negative Hessian eigenvalues.
    index : int
        Number of negative Hessian eigenvalues.
    """

    point: np.ndarray
    value: float
    hess_det: float
    signature: int
    index: int
    normalization: str = "kahler"

    def to_dict(self) -> dict:
        return {
            "point_re": [float(v) for v in self.point.real],
            "point_im": [float(v) for v in self.point.imag],
            "value": float(self.value),
            "hess_det": float(self.hess_det),
            "signature": int(self.signature),
            "index": int(self.index),
            "normalization": self.normalization,
        }


class _Derivatives:
    """Compiled first and second Wirtinger derivatives of a coefficient table."""

    def __init__(self, H: InvariantSymbol):
        p = H.polynomial()
        d = H.d
        self.d, self.k = d, H.k
        self.p = p.compile()
        self.pu = [p.derivative(i).compile() for i in range(d)]
        self.pv = [p.derivative(i, True).compile() for i in range(d)]
        self.puu = [[p.derivative(i).derivative(j).compile() for j in range(d)] for i in range(d)]
        self.puv = [[p.derivative(i).derivative(j, True).compile() for j in range(d)] for i in range(d)]

    @staticmethod
    def _ev(c, u, v):
        return complex(_eval_compiled(c[0], c[1], c[2], u, v))

    def value(self, u):
        v = np.conj(u)
        s = float(np.real(np.vdot(u, u)))
        return self._ev(self.p, u, v).real / s ** self.k

    def first(self, u):
        """``dF/du_i`` for ``F = p / s^k``."""
        v = np.conj(u)
        k = self.k
        s = float(np.real(np.vdot(u, u)))
        P = self._ev(self.p, u, v)
        pu = np.array([self._ev(c, u, v) for c in self.pu])
        return pu / s ** k - k * P * v / s ** (k + 1)

    def second(self, u):
        """Return ``(A, B)`` with ``A_ij = d2F/du_i du_j`` and ``B_ij = d2F/du_i dubar_j``."""
        v = np.conj(u)
        d, k = self.d, self.k
        s = float(np.real(np.vdot(u, u)))
        P = self._ev(self.p, u, v)
        pu = np.array([self._ev(c, u, v) for c in self.pu])
        pv = np.array([self._ev(c, u, v) for c in self.pv])
        puu = np.array([[self._ev(c, u, v) for c in row] for row in self.puu])
        puv = np.array([[self._ev(c, u, v) for c in row] for row in self.puv])
        A = (puu / s ** k
             - k / s ** (k + 1) * (np.outer(pu, v) + np.outer(v, pu))
             + k * (k + 1) * P / s ** (k + 2) * np.outer(v, v))
        B = (puv / s ** k
             - k / s ** (k + 1) * (np.outer(pu, u) + np.outer(v, pv))
             + k * (k + 1) * P / s ** (k + 2) * np.outer(v, u)
             - k * P / s ** (k + 1) * np.eye(d))
        return A, B


@lru_cache(maxsize=64)
def _derivatives_cached(key) -> _Derivatives:
    d, k, items, order = key
    return _Derivatives(InvariantSymbol(d, k, dict(items), order))


def _derivs(H: InvariantSymbol) -> _Derivatives:
    key = (H.d, H.k, tuple(sorted(H.coefficients.items())), H.isotropic_order)
    return _derivatives_cached(key)


def tangent_frame(z: np.ndarray) -> np.ndarray:
    """Orthonormal basis (d x (d-1)) of the Hermitian complement of z."""
    d = len(z)
    M = np.column_stack([z, np.eye(d, dtype=complex)])
    Q, _ = np.linalg.qr(M)
    return Q[:, 1:d]


def _chart_data(D: _Derivatives, z: np.ndarray):
    """Real gradient and real Hessian at the chart origin, in coordinates (Re w, Im w)."""
    V = tangent_frame(z)
    g = V.T @ D.first(z)
    A, B = D.second(z)
    Aw = V.T @ A @ V
    Bw = V.T @ B @ V.conj()
    grad = np.concatenate([2 * g.real, -2 * g.imag])
    hxx = 2 * np.real(Aw + Bw)
    hxy = 2 * np.imag(Bw - Aw)
    hyy = 2 * np.real(Bw - Aw)
    Hs = np.block([[hxx, hxy], [hxy.T, hyy]])
    return V, grad, 0.5 * (Hs + Hs.T)


def _normalize_phase(z: np.ndarray) -> np.ndarray:
    z = z / np.linalg.norm(z)
    j = int(np.argmax(np.abs(z)))
    return z * (abs(z[j]) / z[j])


def _scale(H: InvariantSymbol) -> float:
    return max(H.coefficient_scale(), 1e-300)


def gradient_norm(H: InvariantSymbol, z) -> float:
    """Euclidean norm of the real chart gradient at z, relative to the coefficient scale."""
    z = np.asarray(z, dtype=complex)
    z = z / np.linalg.norm(z)
    _, grad, _ = _chart_data(_derivs(H), z)
    return float(np.linalg.norm(grad)) / _scale(H)


def hessian_data(H: InvariantSymbol, z, fs_normalization: str = "kahler",
                 check_gradient: bool = True) -> Tuple[float, int]:
    """Hessian determinant and signature at a critical point.

    Parameters
    ----------
    H : InvariantSymbol
    z : array_like
        Critical point representative; it is normalised internally.
    fs_normalization : {"kahler", "round"}
        Metric used for the orthonormal frame.

    Returns
    -------
    (d_j, sigma_j)

    Raises
    ------
    ValueError
        If the gradient at ``z`` exceeds ``1e-10`` (relative).
    NotMorseError
        If the determinant is below ``1e-8 * scale^(2d-2)``.
    """
    det, sig, _ = _hessian_full(H, z, fs_normalization, check_gradient)
    return det, sig


def _hessian_full(H, z, fs_normalization, check_gradient=True):
    if fs_normalization not in FS_NORMALIZATIONS:
        raise ValueError(f"unknown FS normalisation {fs_normalization!r}")
    z = np.asarray(z, dtype=complex)
    z = z / np.linalg.norm(z)
    _, grad, Hs = _chart_data(_derivs(H), z)
    scale = _scale(H)
    if check_gradient and np.linalg.norm(grad) > GRAD_TOL * scale:
        raise ValueError(f"not a critical point (gradient {np.linalg.norm(grad):.3e})")
    Hs = Hs * FS_NORMALIZATIONS[fs_normalization]
    ev = np.linalg.eigvalsh(Hs)
    det = float(abs(np.prod(ev)))
    m2 = len(ev)
    if det < MORSE_TOL * scale ** m2:
        raise NotMorseError(f"degenerate critical point (|det| = {det:.3e})", point=z, hess_det=det)
    npos = int(np.sum(ev > 0))
    nneg = int(np.sum(ev < 0))
    return det, npos - nneg, nneg


def _refine(D: _Derivatives, z: np.ndarray, scale: float, max_iter: int = 200) -> Optional[np.ndarray]:
    """Levenberg-Marquardt on the chart gradient; returns None when not converged."""
    mu = 1e-3 * scale
    V, grad, Hs = _chart_data(D, z)
    gn = np.linalg.norm(grad)
    m = len(z) - 1
    for _ in range(max_iter):
        if gn < 1e-13 * scale:
            return z
        J = Hs
        step = -np.linalg.solve(J.T @ J + mu ** 2 * np.eye(2 * m), J.T @ grad)
        w = step[:m] + 1j * step[m:]
        # cap the step: the chart is only good near the origin
        nw = np.linalg.norm(w)
        if nw > 0.5:
            w *= 0.5 / nw
        zn = z + V @ w
        zn /= np.linalg.norm(zn)
        Vn, gradn, Hsn = _chart_data(D, zn)
        gnn = np.linalg.norm(gradn)
        if gnn < gn:
            z, V, grad, Hs, gn = zn, Vn, gradn, Hsn, gnn
            mu = max(mu / 5, 1e-14 * scale)
        else:
            mu *= 4
            if mu > 1e8 * scale:
                break
    return z if gn < GRAD_TOL * scale else None


def _random_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def fs_distance(z, w) -> float:
    """Fubini-Study angle between the lines through z and w."""
    z = np.asarray(z) / np.linalg.norm(z)
    w = np.asarray(w) / np.linalg.norm(w)
    return float(np.arccos(min(1.0, abs(np.vdot(z, w)))))


def find_critical_points(H: InvariantSymbol, seed: int = 0, fs_normalization: str = "kahler",
                         restarts: Optional[int] = None) -> List[CriticalPointData]:
    """All critical points of H on CP^{d-1}.

    A seeded multistart Levenberg-Marquardt search on the gradient residual
    finds minima, maxima and saddles alike. Duplicates (FS distance below
    ``1e-6``) are merged.

    Raises
    ------
    NotMorseError
        Some critical point is degenerate.
    IncompleteSearchError
        The alternating index sum differs from the Euler characteristic d.
    """
    d = H.d
    if d == 1:
        z = np.ones(1, dtype=complex)
        return [CriticalPointData(z, float(H(z)), 1.0, 0, 0, fs_normalization)]
    D = _derivs(H)
    scale = _scale(H)
    if not H.coefficients:
        raise NotMorseError("zero symbol is not Morse", hess_det=0.0)
    rng = np.random.default_rng(seed)
    n = restarts if restarts is not None else 64 * d
    found: List[np.ndarray] = []
    for _ in range(n):
        z = _refine(D, _random_sphere(rng, d), scale)
        if z is None:
            continue
        z = _normalize_phase(z)
        if all(fs_distance(z, w) >= DEDUP_TOL for w in found):
            found.append(z)
    if not found:
        raise IncompleteSearchError("no critical point converged")
    out = []
    for z in found:
        det, sig, idx = _hessian_full(H, z, fs_normalization)
        out.append(CriticalPointData(z, float(D.value(z)), det, sig, idx, fs_normalization))
    euler = sum((-1) ** c.index for c in out)
    if euler != d:
        raise IncompleteSearchError(f"index sum {euler} differs from Euler characteristic {d}")
    out.sort(key=lambda c: (c.value, c.index))
    return out
