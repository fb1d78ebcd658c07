"""Trace asymptotics of perturbed isotropic harmonic oscillators.

Modules
-------
symbols
    polynomial symbols, orbit averaging, the complex canonical map, Berezin flow
morse
    critical points on CP^{d-1} with Hessian data
hermite
    oscillator-basis operators, exact averaging, block spectra
fock
    Toeplitz matrices on homogeneous polynomials
asymptotics
    closed-form leading-order predictors
trace
    windowed trace transforms, e-series, rate fits
"""
__version__ = "0.1.0"

from .errors import (ConfigError, CoverageGapError, DegreeError, IncompleteSearchError, IsotraceError,
                     LeakageError, NotMorseError, VariableKindError)
from .symbols import InvariantSymbol, PhasePolynomial

__all__ = [
    "__version__", "InvariantSymbol", "PhasePolynomial",
    "ConfigError", "CoverageGapError", "DegreeError", "IncompleteSearchError", "IsotraceError",
    "LeakageError", "NotMorseError", "VariableKindError",
]
