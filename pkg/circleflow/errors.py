"""Exception hierarchy shared by the library and the command-line front end.

Each domain error carries the process exit code the CLI reports for it.
"""

from __future__ import annotations


class CircleflowError(RuntimeError):
    """Base class for domain failures raised by circleflow."""

    exit_code: int = 1


class InvalidInputError(CircleflowError):
    """Raised when user-supplied data cannot be parsed or validated."""

    exit_code = 2


class ConventionMismatch(CircleflowError, ValueError):
    """Raised when a metric uses the wrong conformal-factor convention."""

    exit_code = 2


class PositivityViolation(CircleflowError):
    """Raised when a conformal factor or power base is not strictly positive."""

    exit_code = 3

    def __init__(self, minimum: float, floor: float, context: str = "") -> None:
        """Record the offending minimum and the floor it fell under."""
        self.minimum = minimum
        self.floor = floor
        where = f" in {context}" if context else ""
        super().__init__(f"Minimum value {minimum:.3e}{where} is not above floor {floor:.1e}")


class ConvergenceFailure(CircleflowError):
    """Raised when an iterative solver stops short of its tolerance."""

    exit_code = 4


class BlowupSuspected(CircleflowError):
    """Raised when a flow keeps rejecting steps until dt underflows."""

    exit_code = 5


class StepRejected(CircleflowError):
    """Raised by a single flow step; the integrator halves dt and retries."""

    exit_code = 5


class VerificationFailed(CircleflowError):
    """Raised when an identity suite reports residuals above tolerance."""

    exit_code = 1
