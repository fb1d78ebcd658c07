"""Leading-order closed-form predictors for trace singularities.

Conventions
-----------
The Schroedinger trace is ``w(t) = sum_j exp(-i t lambda_j)`` and its localised
inverse transform ``(2 pi)^{-1} int chi(t) exp(i t lambda) w(t) dt``. The Toeplitz
propagator is ``exp(+i t sqrt(N) T_N)``, which explains the opposite signs
of the signature phase in the two predictors.

Amplitudes carry an optional ``scale`` that stands for a metric calibration
factor. It is 1 unless a calibration run says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from .morse import CriticalPointData

PHASE_FLAGS = ("statement", "proof")
CONVENTIONS = ("volume", "plain")


@dataclass(frozen=True)
class SingularityTerm:
    gamma: complex
    frequency: float
    p0: float = 0.0


@dataclass(frozen=True)
class SingularityPrediction:
    """Leading singularity data at ``t = 2 pi k``.

    ``order`` is the power of lambda multiplying the oscillatory sum.
    """

    k: int
    d: int
    terms: Tuple[SingularityTerm, ...]
    scale: float = 1.0
    phase_flag: str = "statement"

    @property
    def order(self) -> float:
        return (self.d - 1) / 2

    def envelope(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        return self.scale * lam ** self.order * sum(abs(t.gamma) for t in self.terms)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "d": self.d, "order": self.order, "scale": self.scale,
            "phase_flag": self.phase_flag,
            "terms": [{"gamma_re": t.gamma.real, "gamma_im": t.gamma.imag, "gamma_abs": abs(t.gamma),
                       "frequency": t.frequency, "p0": t.p0} for t in self.terms],
        }


def predict_gamma0(k: int, crit: CriticalPointData, p0_value: float, d: int,
                   phase_flag: str = "statement") -> complex:
    """Leading coefficient contributed by one critical point.

    ``(pi k)^{-(d-1)} d_j^{-1/2} exp(pi i (-sigma_j/4 + d k)) exp(-2 pi i k p0)``.
    With ``phase_flag="proof"`` the factor ``exp(pi i d k)`` is left out.

    Raises
    ------
    ValueError
        ``k == 0`` or a non-positive determinant.
    """
    if k == 0:
        raise ValueError("k = 0 is the Weyl-law singularity and has no prediction here")
    if phase_flag not in PHASE_FLAGS:
        raise ValueError(f"phase_flag must be one of {PHASE_FLAGS}")
    if not crit.hess_det > 0:
        raise ValueError("critical point is degenerate")
    m = d - 1
    mod = (np.pi * abs(k)) ** (-m) * crit.hess_det ** -0.5
    # for k < 0 the window sits at negative time, flipping the signature phase
    ph = -np.sign(k) * crit.signature / 4
    if phase_flag == "statement":
        ph += d * k
    return complex(mod * np.exp(1j * np.pi * ph) * np.exp(-2j * np.pi * k * p0_value))


def singularity_prediction(crits: Sequence[CriticalPointData], k: int, d: int,
                           p0_values: Iterable[float] | None = None, phase_flag: str = "statement",
                           scale: float = 1.0) -> SingularityPrediction:
    crits = list(crits)
    p0s = [0.0] * len(crits) if p0_values is None else [float(v) for v in p0_values]
    terms = tuple(SingularityTerm(predict_gamma0(k, c, p, d, phase_flag), float(c.value), p)
                  for c, p in zip(crits, p0s))
    return SingularityPrediction(k, d, terms, scale, phase_flag)


def predict_singularity(lam, k: int, pred: SingularityPrediction, second_order: bool = False,
                        carrier: bool = True) -> np.ndarray:
    """``lambda^{(d-1)/2} exp(2 pi i k lambda) sum_j gamma_j exp(-2 pi i k sqrt(lambda) f_j)``.

    Parameters
    ----------
    second_order : bool
        Multiply each term by ``exp(i pi k f_j^2)``. This is the next term of
        the expansion of ``sqrt(lambda_j)`` around the cluster centre. It is a
        constant phase, missing from the leading-order formula.
    carrier : bool
        Include ``exp(2 pi i k lambda)``.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("lambda must be positive")
    if k != pred.k:
        raise ValueError("prediction was built for a different k")
    s = np.zeros(lam.shape, dtype=complex)
    rl = np.sqrt(lam)
    for t in pred.terms:
        term = t.gamma * np.exp(-2j * np.pi * k * rl * t.frequency)
        if second_order:
            term = term * np.exp(1j * np.pi * k * t.frequency ** 2)
        s = s + term
    out = pred.scale * lam ** pred.order * s
    if carrier:
        out = out * np.exp(2j * np.pi * k * lam)
    return out


def predict_block_trace(N: int, t: float, crits: Sequence[CriticalPointData], m: int | None = None,
                        convention: str = "volume", scale: float = 1.0) -> complex:
    """Leading term of ``Tr exp(i t sqrt(N) T_N[H])``.

    ``convention="volume"`` uses the prefactor ``(N/2 pi)^m``, ``"plain"`` uses
    ``N^m``; both multiply ``(|t| sqrt(N) / 4 pi)^{-m}`` and the sum over
    critical points of ``exp(i t sqrt(N) H) exp(i pi sgn(t) sigma / 4) / sqrt(d)``.

    Raises
    ------
    ValueError
        ``t == 0``.
    """
    if t == 0:
        raise ValueError("prediction is singular at t = 0 (the exact trace is dim(N, d))")
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    crits = list(crits)
    if m is None:
        m = len(crits[0].point) - 1
    pref = (N / (2 * np.pi)) ** m if convention == "volume" else float(N) ** m
    pref *= (abs(t) * np.sqrt(N) / (4 * np.pi)) ** (-m)
    st = np.sign(t)
    s = 0j
    for c in crits:
        s += np.exp(1j * t * np.sqrt(N) * c.value) * np.exp(1j * np.pi * st * c.signature / 4) / np.sqrt(c.hess_det)
    return complex(scale * pref * s)


def predict_equiv(lam, r: float, a: float, k0: int, d: int, sign_flag: int = 1,
                  second_order: bool = False, carrier: bool = False) -> np.ndarray:
    """``lambda^{-r} exp(i pi k0 d) exp(s 2 pi i k0 a sqrt(lambda))`` with ``s = sign_flag``.

    ``second_order`` adds the constant phase ``exp(i pi k0 a^2)`` and
    ``carrier`` the factor ``exp(2 pi i k0 lambda)``; both are off by default.
    """
    if sign_flag not in (1, -1):
        raise ValueError("sign_flag must be +1 or -1")
    if k0 == 0:
        raise ValueError("k0 must be nonzero")
    lam = np.asarray(lam, dtype=float)
    out = lam ** (-r) * np.exp(1j * np.pi * k0 * d) * np.exp(sign_flag * 2j * np.pi * k0 * a * np.sqrt(lam))
    if second_order:
        out = out * np.exp(1j * np.pi * k0 * a * a)
    if carrier:
        out = out * np.exp(2j * np.pi * k0 * lam)
    return out


def predictor_agreement(crits: Sequence[CriticalPointData], k: int, d: int, Ns) -> np.ndarray:
    """Relative gap between the two leading predictions at ``lambda = N``.

    The windowed-trace prediction (carrier and ``exp(i pi d k)`` removed and
    conjugated, since the two traces use opposite time signs) is compared
    with the Toeplitz prediction at ``t = 2 pi k``.
    """
    out = []
    for N in np.atleast_1d(Ns):
        pred = singularity_prediction(crits, k, d)
        a = predict_singularity(np.array([float(N)]), k, pred, carrier=False)[0]
        a = np.conj(a * np.exp(-1j * np.pi * d * k))
        b = predict_block_trace(int(N), 2 * np.pi * k, crits, d - 1)
        out.append(abs(a - b) / abs(b))
    return np.array(out)
