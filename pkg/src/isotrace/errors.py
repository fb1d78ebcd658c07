"""Exception types raised across the package."""


class IsotraceError(Exception):
    """Base class for all package errors."""


class VariableKindError(IsotraceError, TypeError):
    """A polynomial in (x, xi) was passed where (z, zbar) was required, or vice versa."""


class DegreeError(IsotraceError, ValueError):
    """Polynomial degree or bidegree outside the supported class."""


class NotMorseError(IsotraceError):
    """A critical point has a (numerically) degenerate Hessian."""

    def __init__(self, message, point=None, hess_det=None):
        super().__init__(message)
        self.point = point
        self.hess_det = hess_det


class IncompleteSearchError(IsotraceError):
    """The multistart critical-point search did not account for all critical points."""


class LeakageError(IsotraceError, ValueError):
    """The time window is too wide and would pick up neighbouring singularities."""


class CoverageGapError(IsotraceError, ValueError):
    """Spectrum blocks do not cover a contiguous range of levels 0..N_max."""


class ConfigError(IsotraceError, ValueError):
    """Invalid experiment configuration."""
