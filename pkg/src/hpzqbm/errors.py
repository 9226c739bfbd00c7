"""Exception hierarchy.

Configuration problems derive from ``ValueError``; numerical failures derive
from ``ArithmeticError``. The CLI maps the two families onto exit codes 2 and 3.
"""


class HpzError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HpzError, ValueError):
    """Invalid physical or run configuration."""


class UsageError(HpzError, ValueError):
    """Inputs inconsistent with each other (grid mismatch, coverage, ...)."""


class NumericalError(HpzError, ArithmeticError):
    """A computation could not be carried out to the required accuracy."""


class AccuracyError(NumericalError):
    def __init__(self, message, suggested_ds=None):
        super().__init__(message)
        self.suggested_ds = suggested_ds


class SingularBoundaryError(NumericalError):
    """The two-point boundary problem for u1, u2 has no unique solution."""

    def __init__(self, t):
        super().__init__(f"singular boundary: v2(t) vanishes at t={t!r} (conjugate point)")
        self.t = t


class DegeneracyError(NumericalError):
    """Wronskian-type denominator too close to zero."""


class CoefficientSingularityError(NumericalError):
    """du1/ds at s=t vanishes, so the master-equation coefficients blow up."""

    def __init__(self, t):
        super().__init__(f"coefficient singularity: du1(t)=0 (reduced propagator singular) at t={t!r}")
        self.t = t


class ExtractionError(NumericalError):
    """Ill-conditioned inversion while extracting coefficients from the oracle."""


class SymplecticityError(NumericalError):
    """Propagator failed the symplecticity check."""


class SingularTrajectoryError(NumericalError):
    """A flagged coefficient row lies inside the evolution horizon."""

    def __init__(self, t, reason=""):
        msg = f"trajectory row at t={t!r} is flagged as singular"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.t = t


class WignerEvaluationError(NumericalError):
    """Covariance matrix is not positive definite."""
