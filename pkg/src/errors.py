# src/errors.py
# Exception hierarchy shared by all simulation components


class SpaError(RuntimeError):
    """Base class for recoverable simulation failures.

    Sweeps catch these per grid cell and record them in the row's
    error column; anything else is a bug and propagates.
    """


class InvalidSpec(ValueError):
    """A device or solver description violates its invariants"""


class ConfigError(ValueError):
    """Configuration file, environment or CLI values are unusable"""


class NoMinimumFound(SpaError):
    """SNAIL potential has no tracked minimum in the search window"""


class RootNotBracketed(SpaError):
    """Dispersion relation has no root on the fundamental branch"""


class AboveThreshold(SpaError):
    """Operating point is at or beyond the parametric instability threshold"""


class NoConvergence(SpaError):
    """Iterative solver did not converge"""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class GainUnreachable(SpaError):
    """No pump strength below threshold reaches the requested gain"""


class DegenerateKerr(SpaError):
    """Kerr constant too small for the closed-form amplitude formula"""


class NoSolution(SpaError):
    """Requested gain is not reached at any input power"""


class Unbounded(SpaError):
    """Result diverges (vanishing Kerr constant)"""


class MissingPumpCoupling(SpaError):
    """Pump power neither given nor computable without a pump-port coupling"""


class OscillatorEscape(SpaError):
    """Time-domain amplitude left the escape radius"""


class SearchFailed(SpaError):
    """Kerr-free point search found no finite compression power"""
