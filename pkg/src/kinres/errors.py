"""Exception types shared across the package.

Numerical failures (quadrature, resummation, inversion, hierarchy) derive
from NumericalError so the CLI can map them to a common exit code; input
problems derive from ValidationError.
"""


class KinresError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(KinresError):
    """Invalid configuration or arguments, detected before any computation."""


class NumericalError(KinresError):
    """A computation started but failed to produce a trustworthy result."""


class NonConvergent(NumericalError):
    """Quadrature error estimate stayed above target at the sample budget."""


class DomainError(ValidationError):
    """Laplace variable outside the region where the transform converges."""


class DegenerateDenominator(NumericalError):
    """A continued-fraction coefficient would divide by a vanishing kernel."""


class ZeroConvergent(NumericalError):
    """A continued-fraction convergent vanished during evaluation."""

    def __init__(self, message: str, z: complex | None = None):
        super().__init__(message)
        self.z = z


class SingularMatrix(NumericalError):
    """Matrix resummation hit a non-invertible (I - Xi) factor."""


class InversionUnstable(NumericalError):
    """Inverse Laplace series acceleration failed to settle."""


class NonPositiveRate(NumericalError):
    """An equilibrium ratio was requested from non-positive resummed rates."""


class NotConverged(NumericalError):
    """Hierarchy refinement still changes the observable beyond tolerance."""


class PlateauNotReached(NumericalError):
    """Hierarchy propagation ended before the population plateaued."""


class PoorFit(NumericalError):
    """Exponential tail fit residual exceeded the acceptance threshold."""
