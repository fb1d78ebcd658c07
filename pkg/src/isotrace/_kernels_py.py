"""Pure numpy versions of the compiled kernels (same signatures and semantics)."""
import numpy as np


def windowed_sum(x, lam, wts, k, width, s_cut):
    """sum_j wts_j exp(2 pi i k (x - lam_j)) g(x - lam_j) over |x - lam_j| <= s_cut."""
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    wts = np.asarray(wts, dtype=float)
    unit = wts.shape[0] == 0
    out = np.zeros(len(x), dtype=complex)
    if len(x) == 0 or len(lam) == 0:
        return out
    norm = width / np.sqrt(2 * np.pi)
    a = 0.5 * width * width
    om = 2 * np.pi * k
    lo = np.searchsorted(lam, x - s_cut, side="left")
    hi = np.searchsorted(lam, x + s_cut, side="right")
    j0, j1 = int(lo.min()), int(hi.max())
    ph = om * lam[j0:j1]
    cr, ci = np.cos(ph), np.sin(ph)
    for i in range(len(x)):
        s = x[i] - lam[lo[i]:hi[i]]
        g = norm * np.exp(-a * s * s)
        if not unit:
            g = g * wts[lo[i]:hi[i]]
        re = np.sum(g * cr[lo[i] - j0:hi[i] - j0])
        im = np.sum(g * ci[lo[i] - j0:hi[i] - j0])
        out[i] = np.exp(1j * om * x[i]) * complex(re, -im)
    return out


def exp_sum(t, lam, wts):
    """sum_j wts_j exp(i t lam_j) for each t."""
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    wts = np.asarray(wts, dtype=float)
    g = np.ones_like(lam) if wts.shape[0] == 0 else wts
    out = np.zeros(len(t), dtype=complex)
    for i in range(len(t)):
        ph = t[i] * lam
        out[i] = complex(np.sum(g * np.cos(ph)), np.sum(g * np.sin(ph)))
    return out
