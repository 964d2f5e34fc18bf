"""Conformal metrics on the circle and their curvature quantities.

Two conventions are supported for a conformal factor w > 0:

* ``POW4``:  g = w^(−4) g_s, arclength dσ = w^(−2) dθ, ∇_g = w² ∂_θ.
* ``POW43``: g = v^(−4/3) g_s, arclength dS = v^(−2/3) dθ, ∇_g = v^(2/3) ∂_θ.

A POW43 metric with factor v is the POW4 metric with factor v^(1/3); the
bridge is explicit through :meth:`ConformalMetric.to_pow4` and
:meth:`ConformalMetric.to_pow43`. Every operator can be evaluated
intrinsically or by pulling back to the round metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
import logging

from circleflow.errors import ConventionMismatch
from circleflow.spectral_core import (
    PeriodicFunction,
    check_positive,
    differentiate,
    integrate,
    power,
)

_logger: logging.Logger = logging.getLogger(__name__)


class Convention(StrEnum):
    """Exponent convention relating a conformal factor to its metric."""

    POW4 = "pow4"
    POW43 = "pow43"


class PVariant(StrEnum):
    """Which fourth-order conformal operator to apply."""

    SYMMETRIC = "symmetric"
    STANDARD = "standard"
    GENERAL = "general"


class CurvatureQuantity(StrEnum):
    """Curvature fields selectable by name (CLI and reports)."""

    AFFINE = "R1"
    FOUR_SCALAR = "R4"
    ALPHA_SCALAR = "Ralpha"
    SYMMETRIC_Q = "QA"
    Q = "Q"
    GENERAL_Q = "Qalpha"


_POW4_QUANTITIES = frozenset(
    {CurvatureQuantity.AFFINE, CurvatureQuantity.FOUR_SCALAR, CurvatureQuantity.ALPHA_SCALAR}
)
_LENGTH_EXPONENT = {Convention.POW4: -2.0, Convention.POW43: -2.0 / 3.0}
_GRADIENT_EXPONENT = {Convention.POW4: 2.0, Convention.POW43: 2.0 / 3.0}


@dataclass(frozen=True)
class ConformalMetric:
    """A metric conformal to the round one, stored through its conformal factor.

    Raises:
        PositivityViolation: If the factor is not strictly positive.
    """

    factor: PeriodicFunction
    convention: Convention = Convention.POW4

    def __post_init__(self) -> None:
        check_positive(self.factor, context=f"{self.convention} conformal factor")

    @classmethod
    def round(cls, n: int, convention: Convention = Convention.POW4) -> ConformalMetric:
        """Return the round metric g_s on an n-point grid."""
        return cls(PeriodicFunction.constant(1.0, n), convention)

    @property
    def n(self) -> int:
        """Grid size of the factor."""
        return self.factor.n

    def scaled(self, c: float) -> ConformalMetric:
        """Return the metric whose factor is c times this one."""
        return ConformalMetric(self.factor * c, self.convention)

    def length_element(self) -> PeriodicFunction:
        """Density of dS_g against dθ."""
        return power(self.factor, _LENGTH_EXPONENT[self.convention])

    def length(self) -> float:
        """Total length ∫ dS_g."""
        return integrate(self.length_element())

    def to_pow4(self) -> ConformalMetric:
        """Return the same metric written in the POW4 convention."""
        if self.convention is Convention.POW4:
            return self
        return ConformalMetric(power(self.factor, 1.0 / 3.0), Convention.POW4)

    def to_pow43(self) -> ConformalMetric:
        """Return the same metric written in the POW43 convention."""
        if self.convention is Convention.POW43:
            return self
        return ConformalMetric(power(self.factor, 3.0), Convention.POW43)


@dataclass(frozen=True)
class CurvatureReport:
    """A curvature field together with its metric integrals."""

    field: PeriodicFunction
    mean: float
    total: float
    length: float


def _require(g: ConformalMetric, convention: Convention, operation: str) -> None:
    if g.convention is not convention:
        raise ConventionMismatch(
            f"{operation} needs a {convention} metric, got {g.convention}"
        )


def _require_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return alpha


def report(g: ConformalMetric, field: PeriodicFunction) -> CurvatureReport:
    """Integrate ``field`` against the length element of ``g``."""
    density = g.length_element()
    total = integrate(field * density)
    length = integrate(density)
    return CurvatureReport(field=field, mean=total / length, total=total, length=length)


def gradient_operator(g: ConformalMetric, f: PeriodicFunction) -> PeriodicFunction:
    """Return ∇_g f, the derivative of f with respect to arclength of g."""
    return power(g.factor, _GRADIENT_EXPONENT[g.convention]) * differentiate(f)


def laplacian(g: ConformalMetric, f: PeriodicFunction) -> PeriodicFunction:
    """Return Δ_g f = ∇_g ∇_g f."""
    return gradient_operator(g, gradient_operator(g, f))


def _alpha_scalar_field(v: PeriodicFunction, alpha: float) -> PeriodicFunction:
    return power(v, 3.0) * (alpha * differentiate(v, 2) + v)


def alpha_scalar_curvature(g: ConformalMetric, alpha: float) -> CurvatureReport:
    """Return R^α_g = v³(α v_θθ + v) for a POW4 metric.

    α = 1 is the affine curvature and α = 4 the four-scalar curvature.

    Raises:
        ConventionMismatch: If ``g`` is not POW4.
        ValueError: If ``alpha`` is not positive.
    """
    _require(g, Convention.POW4, "alpha_scalar_curvature")
    return report(g, _alpha_scalar_field(g.factor, _require_alpha(alpha)))


def affine_curvature(g: ConformalMetric) -> CurvatureReport:
    """Return κ_g = R¹_g."""
    return alpha_scalar_curvature(g, 1.0)


def four_scalar_curvature(g: ConformalMetric) -> CurvatureReport:
    """Return k_g = R⁴_g."""
    return alpha_scalar_curvature(g, 4.0)


def apply_L(
    g: ConformalMetric,
    alpha: float,
    psi: PeriodicFunction,
    *,
    pullback: bool = False,
) -> PeriodicFunction:
    """Apply L^α_g = αΔ_g + R^α_g to ``psi``.

    With ``pullback`` the operator is evaluated as v³ L^α_{g_s}(ψ v) instead of
    intrinsically; both paths agree to spectral accuracy.

    Raises:
        ConventionMismatch: If ``g`` is not POW4.
    """
    _require(g, Convention.POW4, "apply_L")
    alpha = _require_alpha(alpha)
    v = g.factor
    if pullback:
        h = psi * v
        return power(v, 3.0) * (alpha * differentiate(h, 2) + h)
    return alpha * laplacian(g, psi) + _alpha_scalar_field(v, alpha) * psi


def _q_symbol(alpha: float) -> tuple[float, float, float]:
    """Coefficients of ∂⁴, ∂² and 1 in the round-metric operator P^α_{g_s}."""
    return alpha * alpha / 9.0, 10.0 * alpha / 9.0, 1.0


def _general_q_field(v: PeriodicFunction, alpha: float) -> PeriodicFunction:
    c4, c2, c0 = _q_symbol(alpha)
    inner = c4 * differentiate(v, 4) + c2 * differentiate(v, 2) + c0 * v
    return power(v, 5.0 / 3.0) * inner


def general_Q_curvature(g: ConformalMetric, alpha: float) -> CurvatureReport:
    """Return Q^α_g = v^(5/3)((α²/9)v'''' + (10α/9)v'' + v) for a POW43 metric.

    Raises:
        ConventionMismatch: If ``g`` is not POW43.
        ValueError: If ``alpha`` is not positive.
    """
    _require(g, Convention.POW43, "general_Q_curvature")
    return report(g, _general_q_field(g.factor, _require_alpha(alpha)))


def symmetric_Q_curvature(g: ConformalMetric) -> CurvatureReport:
    """Return the symmetric Q-curvature Q^A_g (α = 1)."""
    _require(g, Convention.POW43, "symmetric_Q_curvature")
    return report(g, _general_q_field(g.factor, 1.0))


def Q_curvature(g: ConformalMetric) -> CurvatureReport:
    """Return the Q-curvature Q_g (α = 4)."""
    _require(g, Convention.POW43, "Q_curvature")
    return report(g, _general_q_field(g.factor, 4.0))


def variant_alpha(variant: PVariant, alpha: float | None = None) -> float:
    """Resolve the α that a :class:`PVariant` stands for.

    Raises:
        ValueError: If GENERAL is requested without a positive ``alpha``.
    """
    if variant is PVariant.SYMMETRIC:
        return 1.0
    if variant is PVariant.STANDARD:
        return 4.0
    if alpha is None:
        raise ValueError("PVariant.GENERAL requires alpha")
    return _require_alpha(alpha)


def apply_P(
    g: ConformalMetric,
    variant: PVariant,
    f: PeriodicFunction,
    alpha: float | None = None,
    *,
    pullback: bool = False,
) -> PeriodicFunction:
    """Apply the fourth-order operator P^α_g to ``f``.

    The intrinsic form is (α²/9)Δ²_g f + (10α/9)∇_g(R^α_g ∇_g f) + Q^α_g f,
    where R^α_g is read off the same metric in the POW4 convention. With
    ``pullback`` the operator is evaluated as v^(5/3) P^α_{g_s}(f v).

    Raises:
        ConventionMismatch: If ``g`` is not POW43.
    """
    _require(g, Convention.POW43, "apply_P")
    a = variant_alpha(variant, alpha)
    v = g.factor
    c4, c2, c0 = _q_symbol(a)
    if pullback:
        h = f * v
        inner = c4 * differentiate(h, 4) + c2 * differentiate(h, 2) + c0 * h
        return power(v, 5.0 / 3.0) * inner
    r_alpha = _alpha_scalar_field(g.to_pow4().factor, a)
    lap = laplacian(g, f)
    return (
        c4 * laplacian(g, lap)
        + c2 * gradient_operator(g, r_alpha * gradient_operator(g, f))
        + _general_q_field(v, a) * f
    )


def compute_curvature(
    g: ConformalMetric,
    quantity: CurvatureQuantity,
    alpha: float | None = None,
) -> CurvatureReport:
    """Dispatch to the curvature named by ``quantity``.

    POW4 quantities (R1, R4, Ralpha) accept a POW43 metric by bridging it,
    while Q-type quantities require the POW43 convention.

    Raises:
        ConventionMismatch: If a Q-type quantity is requested on a POW4 metric.
        ValueError: If an alpha-dependent quantity is requested without alpha.
    """
    if quantity in _POW4_QUANTITIES:
        if quantity is CurvatureQuantity.AFFINE:
            a = 1.0
        elif quantity is CurvatureQuantity.FOUR_SCALAR:
            a = 4.0
        elif alpha is None:
            raise ValueError(f"{quantity} requires alpha")
        else:
            a = alpha
        # same metric either way, so the length element of g is the right measure
        return report(g, alpha_scalar_curvature(g.to_pow4(), a).field)
    if quantity is CurvatureQuantity.SYMMETRIC_Q:
        return symmetric_Q_curvature(g)
    if quantity is CurvatureQuantity.Q:
        return Q_curvature(g)
    if alpha is None:
        raise ValueError(f"{quantity} requires alpha")
    return general_Q_curvature(g, alpha)
