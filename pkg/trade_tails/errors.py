"""Exception hierarchy for trade_tails.

Every error derives from TradeTailsError and from the closest builtin, so
callers that only know about ValueError / ArithmeticError keep working.
"""

from typing import Optional


class TradeTailsError(Exception):
    """Base class for all library errors."""


class ModelError(TradeTailsError, ValueError):
    """Invalid Markov-modulated Levy model parameters."""


class TimingError(TradeTailsError, ValueError):
    """Invalid trade-timing parameters."""


class ConfigError(TradeTailsError, ValueError):
    """Invalid run configuration.

    Attributes:
        path: Dotted field path of the offending entry, e.g.
            ``timing.probabilities[0]``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class SpectralError(TradeTailsError, ArithmeticError):
    """Numerical failure in the dominant-eigenvalue machinery."""


class NotMetzlerError(SpectralError):
    """Matrix has a negative off-diagonal entry."""


class NotIrreducibleError(SpectralError):
    """Off-diagonal pattern is not strongly connected."""


class NonRealDominantError(SpectralError):
    """Eigenvalue of maximal real part is not real."""


class NonPositiveXiError(SpectralError):
    """Residue scale factor is not strictly positive."""


class NoSolutionError(SpectralError):
    """The exponent equation has no root in the search range.

    Attributes:
        g_max: Value of the exponent curve at the end of the search range.
    """

    def __init__(self, message: str, g_max: Optional[float] = None):
        self.g_max = g_max
        super().__init__(message)


class DegenerateTargetError(TradeTailsError, ValueError):
    """Target eigenvalue level is not strictly positive."""


class MatrixOverflowError(TradeTailsError, OverflowError):
    """Matrix exponential would overflow the configured cap."""


class DomainViolationError(TradeTailsError, ValueError):
    """Transform evaluated outside its region of convergence."""


class EmptyInputError(TradeTailsError, ValueError):
    """No rates supplied."""


class ShapeCapExceededError(TradeTailsError, ValueError):
    """Total Erlang shape exceeds the supported cap."""


class NonPositiveScaleError(TradeTailsError, ArithmeticError):
    """Tail scale constant came out non-positive."""


class InsufficientDataError(TradeTailsError, ValueError):
    """Too few samples for the requested tail estimate."""


class DegenerateSpreadError(TradeTailsError, ValueError):
    """Thresholds do not spread enough for a regression."""
