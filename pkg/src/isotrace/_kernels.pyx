# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled spectral-sum kernels. Semantics match ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, cos, sin, sqrt, M_PI

cnp.import_array()


cdef Py_ssize_t _lower(const double[::1] a, double v) nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef Py_ssize_t _upper(const double[::1] a, double v) nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def windowed_sum(const double[::1] x, const double[::1] lam, const double[::1] wts,
                 double k, double width, double s_cut):
    """sum_j wts_j exp(2 pi i k (x - lam_j)) g(x - lam_j) over |x - lam_j| <= s_cut.

    ``lam`` must be ascending; terms are added in ascending j. The phase is
    split as exp(2 pi i k x) exp(-2 pi i k lam_j), with the second factor
    computed once per point rather than once per (x, lam_j) pair.
    """
    cdef Py_ssize_t n = x.shape[0], m = lam.shape[0], i, j, lo, hi, j0, j1
    cdef bint unit = wts.shape[0] == 0
    out = np.zeros(n, dtype=np.complex128)
    if n == 0 or m == 0:
        return out
    cdef double[:, ::1] o = out.view(np.float64).reshape(n, 2)
    cdef double norm = width / sqrt(2.0 * M_PI)
    cdef double a = 0.5 * width * width
    cdef double om = 2.0 * M_PI * k
    cdef double s, g, re, im, xmin, xmax
    xmin = x[0]
    xmax = x[0]
    for i in range(n):
        if x[i] < xmin:
            xmin = x[i]
        if x[i] > xmax:
            xmax = x[i]
    j0 = _lower(lam, xmin - s_cut)
    j1 = _upper(lam, xmax + s_cut)
    cr_arr = np.empty(max(j1 - j0, 1))
    ci_arr = np.empty(max(j1 - j0, 1))
    cdef double[::1] cr = cr_arr
    cdef double[::1] ci = ci_arr
    with nogil:
        for j in range(j0, j1):
            cr[j - j0] = cos(om * lam[j])
            ci[j - j0] = sin(om * lam[j])
        for i in range(n):
            lo = _lower(lam, x[i] - s_cut)
            hi = _upper(lam, x[i] + s_cut)
            re = 0.0
            im = 0.0
            for j in range(lo, hi):
                s = x[i] - lam[j]
                g = norm * exp(-a * s * s)
                if not unit:
                    g = g * wts[j]
                re = re + g * cr[j - j0]
                im = im + g * ci[j - j0]
            # (cos + i sin)(om x) times (re - i im)
            o[i, 0] = cos(om * x[i]) * re + sin(om * x[i]) * im
            o[i, 1] = sin(om * x[i]) * re - cos(om * x[i]) * im
    return out


def exp_sum(const double[::1] t, const double[::1] lam, const double[::1] wts):
    """sum_j wts_j exp(i t lam_j) for each t, ascending j."""
    cdef Py_ssize_t n = t.shape[0], m = lam.shape[0], i, j
    cdef bint unit = wts.shape[0] == 0
    out = np.zeros(n, dtype=np.complex128)
    cdef double[:, ::1] o = out.view(np.float64).reshape(n, 2)
    cdef double re, im, g, ph
    with nogil:
        for i in range(n):
            re = 0.0
            im = 0.0
            for j in range(m):
                g = 1.0 if unit else wts[j]
                ph = t[i] * lam[j]
                re = re + g * cos(ph)
                im = im + g * sin(ph)
            o[i, 0] = re
            o[i, 1] = im
    return out
