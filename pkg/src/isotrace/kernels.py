"""Backend selection for the spectral-sum kernels.

The compiled extension is used when it imports, unless the environment
variable ``ISOTRACE_PURE_PYTHON`` is set to a non-empty value other than "0".
``BACKEND`` names the active choice.
"""
import os

import numpy as np

from . import _kernels_py

_force_py = os.environ.get("ISOTRACE_PURE_PYTHON", "") not in ("", "0")

_impl = _kernels_py
BACKEND = "python"
if not _force_py:
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        _impl = _compiled
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass

_EMPTY = np.zeros(0)


def _prep(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def windowed_sum(x, lam, wts=None, k=1.0, width=0.35, s_cut=np.inf, backend=None):
    """Gaussian-windowed oscillatory sum over an ascending point set."""
    impl = _select(backend)
    w = _EMPTY if wts is None else _prep(wts)
    return impl.windowed_sum(_prep(x), _prep(lam), w, float(k), float(width), float(s_cut))


def exp_sum(t, lam, wts=None, backend=None):
    impl = _select(backend)
    w = _EMPTY if wts is None else _prep(wts)
    return impl.exp_sum(_prep(t), _prep(lam), w)


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if BACKEND != "cython":
            raise RuntimeError("compiled kernels are not available")
        return _impl
    raise ValueError(f"unknown backend {backend!r}")
