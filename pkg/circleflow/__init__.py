"""Conformal curvature on the circle: sharp inequalities, extremal families and flows."""

from circleflow.errors import (
    BlowupSuspected,
    CircleflowError,
    ConventionMismatch,
    ConvergenceFailure,
    InvalidInputError,
    PositivityViolation,
    VerificationFailed,
)
from circleflow.geometry import ConformalMetric, Convention, CurvatureQuantity, PVariant
from circleflow.spectral_core import PeriodicFunction, power

__all__ = [
    "BlowupSuspected",
    "CircleflowError",
    "ConformalMetric",
    "Convention",
    "ConventionMismatch",
    "ConvergenceFailure",
    "CurvatureQuantity",
    "InvalidInputError",
    "PVariant",
    "PeriodicFunction",
    "PositivityViolation",
    "VerificationFailed",
    "power",
]
