"""Exception hierarchy shared by all modules."""


class PolarmolError(Exception):
    """Base class for all package errors."""


class ParameterError(PolarmolError, ValueError):
    """An input parameter is outside its valid range."""


class ValidationError(PolarmolError, ValueError):
    """An input object violates a structural requirement (e.g. symmetry)."""


class GaugeError(PolarmolError):
    """Adjacent eigenvectors lost their identity (unresolved crossing)."""

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class BoxTooSmallError(PolarmolError):
    """Wavefunction tails do not decay inside the grid."""


class WindowError(PolarmolError):
    """A minimum sits at (or too close to) the edge of the scanned window."""


class ConvergenceError(PolarmolError):
    """A truncation or optimisation did not reach its tolerance."""

    def __init__(self, message, drift=None, best=None):
        super().__init__(message)
        self.drift = drift
        self.best = best


class MemoryGuardError(PolarmolError):
    """Requested problem size exceeds the configured cap."""


class AmbiguityError(PolarmolError):
    """Several equally valid answers exist (e.g. equal spectral maxima)."""

    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class NotStronglyCoupledError(PolarmolError):
    """Spectrum does not show two resolved polariton peaks."""


class SingularityError(PolarmolError):
    """A perturbative denominator vanishes inside the window."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class FitError(PolarmolError):
    """A local fit is degenerate (flat surface, saddle point, ...)."""
