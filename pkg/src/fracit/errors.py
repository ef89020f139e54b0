"""Exception hierarchy shared by every fracit module."""


class FracitError(Exception):
    """Base class for all numerical and domain failures raised by fracit."""


class DomainError(FracitError, ValueError):
    """Input outside the mathematical domain of an operation."""


class PrecisionExhausted(FracitError):
    """The accuracy contract cannot be met within the configured precision ceiling."""


class NoConvergence(FracitError):
    """An iterative solver failed to converge."""


class DegenerateMultiplier(FracitError):
    """Fixed-point multiplier too close to 0 or 1 for the differintegral construction."""

    def __init__(self, message, multiplier=None, level=None):
        super().__init__(message)
        self.multiplier = multiplier
        self.level = level


class BasinEscape(FracitError):
    """An orbit left the divergence bound, so the start is outside the immediate basin."""


class NotConverged(FracitError):
    """An orbit never entered the tolerance neighbourhood of its fixed point."""


class NonIntegrable(FracitError):
    """The auxiliary function does not decay fast enough along the negative ray."""


class QuadratureStall(FracitError):
    """Adaptive panel quadrature exhausted its panel budget."""


class NearIntegerPole(FracitError):
    """Series evaluation requested at an order within the integer guard of a pole."""
