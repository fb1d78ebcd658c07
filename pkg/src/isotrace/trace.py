"""Spectra of ``H0 + B``, localised trace transforms and rate fits.

With ``w(t) = sum_j exp(-i t lambda_j)`` and the Gaussian time window
``chi(t) = exp(-(t - 2 pi k)^2 / (2 w^2))``, the localised inverse transform
has the closed form

    T(lambda) = sum_j exp(2 pi i k (lambda - lambda_j)) g(lambda - lambda_j),
    g(s) = w / sqrt(2 pi) * exp(-w^2 s^2 / 2).

It is evaluated by direct summation in ascending ``lambda_j`` order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import CoverageGapError, LeakageError
from .hermite import BlockOperator, SpectrumBlock, block_spectrum, level_dim, oscillator_energy

LEAKAGE_TOL = 1e-12
CUTOFF_TOL = 1e-30


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenvalues of ``H0 + B`` with their provenance ``(N, j)``."""

    d: int
    n_max: int
    values: np.ndarray
    level: np.ndarray
    position: np.ndarray

    def __len__(self):
        return len(self.values)


def assemble_spectrum(blocks: Sequence[SpectrumBlock], d: int) -> Spectrum:
    """Flatten block spectra into ``N + d/2 + nu_{N,j}``, sorted.

    Raises
    ------
    CoverageGapError
        Levels are not exactly ``0..N_max``.
    """
    blocks = sorted(blocks, key=lambda b: b.N)
    levels = [b.N for b in blocks]
    if not levels or levels != list(range(len(levels))):
        missing = sorted(set(range(max(levels, default=-1) + 1)) - set(levels))
        raise CoverageGapError(f"levels must cover 0..N_max contiguously (missing {missing[:10]}, duplicates or gaps)")
    vals, lv, pos = [], [], []
    for b in blocks:
        if len(b.eigenvalues) != level_dim(b.N, d):
            raise ValueError(f"block {b.N} has {len(b.eigenvalues)} eigenvalues, expected {level_dim(b.N, d)}")
        vals.append(oscillator_energy(b.N, d) + b.eigenvalues)
        lv.append(np.full(len(b.eigenvalues), b.N))
        pos.append(np.arange(len(b.eigenvalues)))
    v = np.concatenate(vals)
    order = np.argsort(v, kind="stable")
    return Spectrum(d, levels[-1], v[order], np.concatenate(lv)[order], np.concatenate(pos)[order])


# ---------------------------------------------------------------------------
# window


@dataclass(frozen=True)
class GaussianWindow:
    """Gaussian time window of width ``w`` centred at ``t = 2 pi k``.

    Raises
    ------
    LeakageError
        If the window height at distance ``pi`` from its centre exceeds
        ``1e-12``, i.e. ``w`` above about ``0.4227``.
    """

    width: float = 0.35

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("window width must be positive")
        if self.leakage() >= LEAKAGE_TOL:
            raise LeakageError(
                f"window width {self.width} leaks {self.leakage():.2e} into neighbouring singularities; "
                f"use width <= {self.max_width():.4f}")

    def leakage(self) -> float:
        return float(np.exp(-np.pi ** 2 / (2 * self.width ** 2)))

    @staticmethod
    def max_width(tol: float = LEAKAGE_TOL) -> float:
        return float(np.pi / np.sqrt(2 * np.log(1 / tol)))

    def kernel(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return self.width / np.sqrt(2 * np.pi) * np.exp(-0.5 * self.width ** 2 * s * s)

    def cutoff(self, tol: float = CUTOFF_TOL) -> float:
        """Distance beyond which the kernel is below ``tol``."""
        peak = self.width / np.sqrt(2 * np.pi)
        return float(np.sqrt(2 * np.log(peak / tol)) / self.width)

    def time_profile(self, t, k) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(-((t - 2 * np.pi * k) ** 2) / (2 * self.width ** 2))


@dataclass
class TraceTransform:
    k: float
    lambda_grid: np.ndarray
    values: np.ndarray
    window: GaussianWindow
    tail_bound: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.lambda_grid, dtype=float)
        if len(g) > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("lambda grid must be strictly ascending")
        self.lambda_grid = g

    @property
    def modulus(self):
        return np.abs(self.values)

    def rows(self):
        for lam, v, tb in zip(self.lambda_grid, self.values, self.tail_bound):
            yield (self.k, float(lam), float(v.real), float(v.imag), float(abs(v)), float(np.angle(v)), float(tb))


# ---------------------------------------------------------------------------
# streamed spectra of H0 + B


def _level_dims(Ns: np.ndarray, d: int) -> np.ndarray:
    from scipy.special import comb

    return comb(Ns + d - 1, d - 1, exact=False)


class LevelSpectrumSource:
    """Eigenvalues of ``H0 + B`` produced level by level on demand.

    Only levels whose cluster can reach a requested interval are computed, so
    very large ``N_max`` never needs the whole spectrum in memory.
    """

    def __init__(self, B: Optional[BlockOperator], d: int, n_max: int, method: str = "auto", label: str = ""):
        self.B = B
        self.d = d
        self.n_max = n_max
        self.method = method
        self.label = label or (B.label if B is not None else "none")

    def radius(self, N) -> np.ndarray:
        """Cluster half-width bound for level(s) N; extrapolated beyond N_max."""
        N = np.atleast_1d(np.asarray(N))
        if self.B is None:
            return np.zeros(len(N))
        if self.B.modes is not None:
            return np.atleast_1d(self.B.modes.bound(N, self.d))
        # no closed form: grow like sqrt(N) from the last available level
        ref = max(self.B.norm_bound(self.n_max), 1e-300)
        return np.array([self.B.norm_bound(int(n)) if n <= self.n_max else ref * np.sqrt((n + 1) / (self.n_max + 1)) for n in N])

    def _degenerate(self) -> bool:
        if self.B is None:
            return True
        m = self.B.modes
        return m is not None and not m.add_energy and np.all(m.w == 0) and m.c0 == 0

    def levels_near(self, lo: float, hi: float, margin: float) -> List[int]:
        lo_n = max(0, int(np.floor(lo - margin - self.d / 2)) - 1)
        # cluster radius grows, so scan outward until it cannot reach
        out = []
        N = lo_n
        while N > 0:
            r = self.radius(N - 1)[0]
            if oscillator_energy(N - 1, self.d) + r < lo - margin:
                break
            N -= 1
        while N <= self.n_max:
            e = oscillator_energy(N, self.d)
            r = self.radius(N)[0]
            if e - r > hi + margin:
                break
            if e + r >= lo - margin:
                out.append(N)
            N += 1
        return out

    def points(self, levels: Iterable[int]):
        """Sorted eigenvalues and weights (weights None means unit)."""
        levels = list(levels)
        if not levels:
            return np.zeros(0), None
        if self._degenerate():
            lam = np.array([oscillator_energy(N, self.d) for N in levels], dtype=float)
            wts = np.array([level_dim(N, self.d) for N in levels], dtype=float)
            return lam, wts
        parts = [oscillator_energy(N, self.d) + block_spectrum(self.B, N, self.method).eigenvalues for N in levels]
        lam = np.concatenate(parts)
        lam.sort(kind="stable")
        return lam, None

    def tail_bound(self, x: np.ndarray, window: GaussianWindow, s_cut: float, included: Iterable[int]) -> np.ndarray:
        """Bound on the window mass left out at each grid point.

        Counts eigenvalues beyond ``s_cut`` in included levels and every
        eigenvalue of excluded levels up to ``N_max``. It also counts levels
        above ``N_max``, which the truncated spectrum omits.
        """
        x = np.atleast_1d(x)
        inc = set(included)
        gcut = float(window.kernel(s_cut))
        top = int(np.max(x) + s_cut + 4 * np.sqrt(np.max(x) + 1) * max(1.0, self._radius_slope()) + 50)
        n_hi = max(top, self.n_max + 1)
        Ns = np.arange(0, n_hi + 1)
        e = Ns + self.d / 2
        r = self.radius(Ns)
        dims = _level_dims(Ns, self.d)
        is_inc = np.zeros(len(Ns), dtype=bool)
        idx = np.array(sorted(n for n in inc if n <= self.n_max), dtype=np.int64)
        is_inc[idx] = True
        out = np.zeros(len(x))
        for i, xi in enumerate(x):
            dist = np.maximum(np.abs(xi - e) - r, 0.0)
            g = np.where(is_inc, gcut, window.kernel(dist))
            out[i] = float(np.sum(dims * g))
        return out

    def _radius_slope(self) -> float:
        if self.B is None or self.B.modes is None:
            return 1.0
        return float(np.max(np.abs(self.B.modes.w))) if len(self.B.modes.w) else 0.0


def windowed_transform(source, k: float, window: GaussianWindow, lambda_grid, chunk: float = 64.0,
                       backend: Optional[str] = None) -> TraceTransform:
    """Localised transform near ``t = 2 pi k`` on a grid of lambda values.

    Parameters
    ----------
    source : Spectrum, LevelSpectrumSource or array_like
        Eigenvalues of ``H0 + B``.
    k : float
        Window centre in units of ``2 pi``; half-integers probe between singularities.
    window : GaussianWindow
    lambda_grid : array_like
        Strictly ascending.
    chunk : float
        Width in lambda of the grid chunks that share one gathered point set.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if len(grid) > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be strictly ascending")
    s_cut = window.cutoff()
    meta = {}
    if isinstance(source, LevelSpectrumSource):
        vals = np.zeros(len(grid), dtype=complex)
        tails = np.zeros(len(grid))
        i = 0
        while i < len(grid):
            j = int(np.searchsorted(grid, grid[i] + chunk, side="right"))
            j = max(j, i + 1)
            lv = source.levels_near(grid[i], grid[j - 1], s_cut)
            lam, wts = source.points(lv)
            vals[i:j] = kernels.windowed_sum(grid[i:j], lam, wts, k, window.width, s_cut, backend=backend)
            tails[i:j] = source.tail_bound(grid[i:j], window, s_cut, lv)
            i = j
        meta = {"d": source.d, "N_max": source.n_max, "perturbation": source.label}
    else:
        lam = source.values if isinstance(source, Spectrum) else np.sort(np.asarray(source, dtype=float))
        vals = kernels.windowed_sum(grid, lam, None, k, window.width, s_cut, backend=backend)
        # terms cut at s_cut, plus nothing beyond the finite set
        n_out = np.array([np.sum(np.abs(x - lam) > s_cut) for x in grid], dtype=float)
        tails = n_out * float(window.kernel(s_cut))
        if isinstance(source, Spectrum):
            meta = {"d": source.d, "N_max": source.n_max}
    return TraceTransform(k, grid, vals, window, tails, meta)


def weighted_transform(points, weights, k: float, window: GaussianWindow, lambda_grid,
                       backend: Optional[str] = None) -> np.ndarray:
    """Windowed transform of a weighted point set (points ascending)."""
    order = np.argsort(points, kind="stable")
    pts = np.asarray(points, dtype=float)[order]
    w = np.asarray(weights, dtype=float)[order]
    return kernels.windowed_sum(np.asarray(lambda_grid, float), pts, w, k, window.width, window.cutoff(), backend=backend)


# ---------------------------------------------------------------------------
# e-series


def e_series_points(r: float, a: float, d: int, n_max: int, n_min: int = 1):
    N = np.arange(n_min, n_max + 1, dtype=float)
    return N + np.sqrt(N) * a + d / 2, N ** r


def eval_e_series(r: float, a: float, d: int, n_max: int, t_grid, backend: Optional[str] = None) -> np.ndarray:
    """Partial sums ``sum_{N=1}^{N_max} N^r exp(i t (N + sqrt(N) a + d/2))`` in ascending N.

    The raw sums are not convergent as ``N_max`` grows; they are meant to be
    used under a window.
    """
    pts, w = e_series_points(r, a, d, n_max)
    return kernels.exp_sum(np.asarray(t_grid, float), pts, w, backend=backend)


def equiv_transform(lambda_grid, r: float, a: float, d: int, k0: int, window: GaussianWindow,
                    n_max: Optional[int] = None, backend: Optional[str] = None) -> np.ndarray:
    """Windowed transform of ``sum_N N^{-r} exp(-i t (N + d/2 + a sqrt(N)))``."""
    grid = np.asarray(lambda_grid, float)
    if n_max is None:
        n_max = int(grid.max() + window.cutoff() + 4 * abs(a) * np.sqrt(grid.max()) + 10)
    pts, w = e_series_points(-r, a, d, n_max)
    return weighted_transform(pts, w, k0, window, grid, backend=backend)


# ---------------------------------------------------------------------------
# fits


def fit_rate(xs, errs):
    """Least squares line through ``(log x, log err)``.

    Returns
    -------
    (slope, intercept, residual)
        ``residual`` is the RMS of the log-residuals.
    """
    xs = np.asarray(xs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if len(xs) < 4 or len(xs) != len(errs):
        raise ValueError("need at least 4 paired points")
    if np.any(xs <= 0) or np.any(errs <= 0) or not np.all(np.isfinite(errs)):
        raise ValueError("fit_rate needs positive finite inputs")
    X, Y = np.log(xs), np.log(errs)
    A = np.column_stack([X, np.ones_like(X)])
    (slope, intercept), *_ = np.linalg.lstsq(A, Y, rcond=None)
    res = float(np.sqrt(np.mean((Y - A @ np.array([slope, intercept])) ** 2)))
    return float(slope), float(intercept), res


def fit_beat(lambda_grid, values, d: int):
    """Fit ``|T|^2 / lambda^{d-1} = A + B cos(Omega sqrt(lambda) + phi)``.

    Returns a dict with ``omega`` (angular frequency in ``sqrt(lambda)``),
    ``A``, ``B``, ``phi`` and the fitted envelope ``sqrt(A + |B|)``.
    """
    from scipy.optimize import curve_fit
    from scipy.signal import lombscargle

    lam = np.asarray(lambda_grid, float)
    u = np.sqrt(lam)
    y = np.abs(values) ** 2 / lam ** (d - 1)
    yc = y - y.mean()
    span = u.max() - u.min()
    om = np.linspace(2 * np.pi / span, np.pi / np.min(np.diff(u)), 20000)
    pgram = lombscargle(u, yc, om)
    om0 = om[int(np.argmax(pgram))]

    def model(u, A, B, Om, phi):
        return A + B * np.cos(Om * u + phi)

    c0 = np.mean(yc * np.cos(om0 * u)) * 2
    s0 = np.mean(yc * np.sin(om0 * u)) * 2
    B0 = np.hypot(c0, s0)
    phi0 = np.arctan2(-s0, c0)
    p, _ = curve_fit(model, u, y, p0=[y.mean(), B0, om0, phi0], maxfev=20000)
    A, B, Om, phi = (float(v) for v in p)
    if Om < 0:
        Om, phi = -Om, -phi
    return {"omega": Om, "A": A, "B": B, "phi": phi, "envelope": float(np.sqrt(max(A + abs(B), 0.0))),
            "omega_seed": float(om0)}


def phase_drift(lambda_grid, measured, reference):
    """Linear fit of the unwrapped phase of ``measured * conj(reference)`` against ``sqrt(lambda)``.

    Returns ``(slope, offset)`` with the offset reduced to ``(-pi, pi]`` at the
    first grid point.
    """
    u = np.sqrt(np.asarray(lambda_grid, float))
    ph = np.unwrap(np.angle(np.asarray(measured) * np.conj(reference)))
    slope, icpt = np.polyfit(u - u[0], ph, 1)
    off = float(np.angle(np.exp(1j * icpt)))
    return float(slope), off
