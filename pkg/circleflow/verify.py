"""Executable identity suites for the conformal operators and sharp inequalities.

Residuals are relative sup norms, sup|lhs − rhs| / max(1, sup|rhs|), so that
fourth-derivative round-off does not masquerade as a formula error.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
import logging
import math

import numpy as np
from pydantic import BaseModel, Field

from circleflow import extremals, functionals
from circleflow.config import RunConfig
from circleflow.extremals import ExtremalParams, Family
from circleflow.functionals import FunctionalKind
from circleflow.geometry import (
    ConformalMetric,
    Convention,
    PVariant,
    alpha_scalar_curvature,
    apply_L,
    apply_P,
    general_Q_curvature,
    laplacian,
    variant_alpha,
)
from circleflow.spectral_core import (
    PeriodicFunction,
    fourier_coeffs,
    from_coeffs,
    from_trig_coefficients,
    integrate,
    power,
    random_positive,
)

_logger: logging.Logger = logging.getLogger(__name__)

COVARIANCE_TOL = 1e-7
IDENTITY_TOL = 1e-7
EXTREMAL_TOL = 1e-6
SHIFT_TOL = 1e-10
BOUND_SLACK = 1e-6
SUITE_CASES = 20
_EPS = float(np.finfo(float).eps)


class OperatorKind(StrEnum):
    """Conformally covariant operators."""

    L = "L"
    P_A = "P_A"
    P = "P"
    P_ALPHA = "P_alpha"


_VARIANTS = {
    OperatorKind.P_A: PVariant.SYMMETRIC,
    OperatorKind.P: PVariant.STANDARD,
    OperatorKind.P_ALPHA: PVariant.GENERAL,
}
_ALPHA_OPERATORS = frozenset({OperatorKind.L, OperatorKind.P_ALPHA})
_Notes = dict[str, float | int | str]


@dataclass(frozen=True)
class CovarianceCase:
    """Base metric g₁, conformal factor φ, test function ψ and the operator under test."""

    base: ConformalMetric
    phi: PeriodicFunction
    psi: PeriodicFunction
    operator: OperatorKind
    alpha: float = 1.0

    def __post_init__(self) -> None:
        expected = Convention.POW4 if self.operator is OperatorKind.L else Convention.POW43
        if self.base.convention is not expected:
            raise ValueError(f"{self.operator} needs a {expected} base metric")


def relative_residual(lhs: PeriodicFunction, rhs: PeriodicFunction) -> float:
    """Return sup|lhs − rhs| / max(1, sup|rhs|)."""
    return (lhs - rhs).sup_norm() / max(1.0, rhs.sup_norm())


def _weight_power(operator: OperatorKind) -> float:
    return 3.0 if operator is OperatorKind.L else 5.0 / 3.0


def _apply(
    operator: OperatorKind, g: ConformalMetric, f: PeriodicFunction, alpha: float
) -> PeriodicFunction:
    if operator is OperatorKind.L:
        return apply_L(g, alpha, f)
    return apply_P(g, _VARIANTS[operator], f, alpha)


def _curvature_field(operator: OperatorKind, g: ConformalMetric, alpha: float) -> PeriodicFunction:
    if operator is OperatorKind.L:
        return alpha_scalar_curvature(g, alpha).field
    return general_Q_curvature(g, variant_alpha(_VARIANTS[operator], alpha)).field


def covariance_residual(
    case: CovarianceCase, lhs_alpha: float | None = None
) -> tuple[float, float]:
    """Return (curvature residual, operator residual) of the covariance identities.

    With g₂ = φ^(−4)g₁ (L) or φ^(−4/3)g₁ (P family), checks
    curvature(g₂) = φ^w·Op_{g₁}φ and Op_{g₂}ψ = φ^w·Op_{g₁}(ψφ), w = 3 or 5/3.
    ``lhs_alpha`` evaluates the g₂ side at another α (negative control).

    Raises:
        PositivityViolation: If φ is not positive.
    """
    g1 = case.base
    g2 = ConformalMetric(g1.factor * case.phi, g1.convention)
    a2 = case.alpha if lhs_alpha is None else lhs_alpha
    weight = power(case.phi, _weight_power(case.operator))
    curvature_rhs = weight * _apply(case.operator, g1, case.phi, case.alpha)
    curvature_lhs = _curvature_field(case.operator, g2, a2)
    operator_rhs = weight * _apply(case.operator, g1, case.psi * case.phi, case.alpha)
    operator_lhs = _apply(case.operator, g2, case.psi, a2)
    return (
        relative_residual(curvature_lhs, curvature_rhs),
        relative_residual(operator_lhs, operator_rhs),
    )


def random_test_function(rng: np.random.Generator, n: int, degree: int = 6) -> PeriodicFunction:
    """Return a signed trigonometric polynomial with coefficients in [−0.3, 0.3]."""
    return from_trig_coefficients(rng.uniform(-0.3, 0.3, size=2 * degree + 1).tolist(), n)


def random_case(
    rng: np.random.Generator,
    operator: OperatorKind,
    n: int,
    alpha: float | None = None,
) -> CovarianceCase:
    """Draw a covariance case from the exponential-trigonometric ensemble."""
    convention = Convention.POW4 if operator is OperatorKind.L else Convention.POW43
    if alpha is None:
        alpha = float(rng.uniform(0.5, 5.0)) if operator in _ALPHA_OPERATORS else 1.0
    base = ConformalMetric(random_positive(rng, n), convention)
    phi = random_positive(rng, n)
    return CovarianceCase(base, phi, random_test_function(rng, n), operator, alpha)


def shift_linearity_check(
    psi: PeriodicFunction,
    C: float,
    metric: ConformalMetric | None = None,
    variant: PVariant = PVariant.SYMMETRIC,
) -> float:
    """Return the defect of P(C + ψ) = C·P(1) + P(ψ).

    Raises:
        ValueError: If C + ψ is not positive.
    """
    if not C + psi.min() > 0:
        raise ValueError(f"C + psi must be positive (C={C}, min psi={psi.min():.3e})")
    g = metric or ConformalMetric.round(psi.n, Convention.POW43)
    one = PeriodicFunction.constant(1.0, psi.n)
    alpha = 2.0 if variant is PVariant.GENERAL else None
    lhs = apply_P(g, variant, psi + C, alpha)
    rhs = C * apply_P(g, variant, one, alpha) + apply_P(g, variant, psi, alpha)
    return relative_residual(lhs, rhs)


def q_alpha_identity_residual(
    g: ConformalMetric, alpha: float, rhs_alpha: float | None = None
) -> float:
    """Return the defect of Q^α = (α/3)Δ_g R^α + (R^α)², R^α read off the POW4 bridge."""
    a = alpha if rhs_alpha is None else rhs_alpha
    q = general_Q_curvature(g, alpha).field
    r = alpha_scalar_curvature(g.to_pow4(), a).field
    return relative_residual(q, (a / 3.0) * laplacian(g, r) + r * r)


def total_Q_identity(g: ConformalMetric, alpha: float) -> tuple[float, float]:
    """Return (∫Q^α dS_g, ∫(R^α)² dS_g).

    Raises:
        ConventionMismatch: If ``g`` is not POW43.
    """
    q = general_Q_curvature(g, alpha)
    r = alpha_scalar_curvature(g.to_pow4(), alpha).field
    return q.total, integrate(r * r * g.length_element())


def divergence_term(g: ConformalMetric, alpha: float) -> float:
    """Return ∫Δ_g R^α dS_g, which vanishes on a closed curve."""
    r = alpha_scalar_curvature(g.to_pow4(), alpha).field
    return integrate(laplacian(g, r) * g.length_element())


def cocycle_residual(
    g1: ConformalMetric,
    phi: PeriodicFunction,
    psi: PeriodicFunction,
    operator: OperatorKind,
    alpha: float = 1.0,
    f: PeriodicFunction | None = None,
) -> float:
    """Compare Op_{g₃}f reached via g₂ = φ·g₁ with the direct change of g₁ by φψ."""
    f = f if f is not None else PeriodicFunction.constant(1.0, g1.n)
    w = _weight_power(operator)
    g2 = ConformalMetric(g1.factor * phi, g1.convention)
    two_step = power(psi, w) * _apply(operator, g2, f * psi, alpha)
    direct = power(phi * psi, w) * _apply(operator, g1, f * phi * psi, alpha)
    return relative_residual(two_step, direct)


def roundoff_floor(n: int, order: int) -> float:
    """Round-off level of an order-``order`` spectral derivative on n points."""
    return 10.0 * _EPS * (n / 2.0) ** order


def spectral_decay(
    operator: OperatorKind, seed: int, sizes: tuple[int, int] = (256, 512)
) -> tuple[float, float]:
    """Return the operator covariance residual of one random case at two resolutions."""
    rng = np.random.default_rng(seed)
    draws = [rng.uniform(-0.3, 0.3, size=13).tolist() for _ in range(3)]
    alpha = 2.5 if operator in _ALPHA_OPERATORS else 1.0
    convention = Convention.POW4 if operator is OperatorKind.L else Convention.POW43
    residuals = []
    for n in sizes:
        base, phi = (
            PeriodicFunction(np.exp(from_trig_coefficients(d, n).values)) for d in draws[:2]
        )
        psi = from_trig_coefficients(draws[2], n)
        case = CovarianceCase(ConformalMetric(base, convention), phi, psi, operator, alpha)
        residuals.append(covariance_residual(case)[1])
    return residuals[0], residuals[1]


class CheckResult(BaseModel):
    """One named residual against its tolerance."""

    name: str
    value: float
    tolerance: float
    passed: bool


class SuiteReport(BaseModel):
    """Outcome of one verification suite."""

    name: str
    passed: bool
    checks: list[CheckResult] = Field(default_factory=list)
    notes: dict[str, float | int | str] = Field(default_factory=dict)


class _Collector:
    def __init__(self) -> None:
        self.checks: list[CheckResult] = []

    def at_most(self, name: str, value: float, tolerance: float) -> None:
        passed = bool(np.isfinite(value) and value <= tolerance)
        self.checks.append(
            CheckResult(name=name, value=float(value), tolerance=tolerance, passed=passed)
        )
        if not passed:
            _logger.warning("[Verify] %s = %.3e exceeds %.1e", name, value, tolerance)


def _covariance_suite(config: RunConfig, corrupt: bool, out: _Collector) -> _Notes:
    rng = np.random.default_rng(config.seed)
    for operator in OperatorKind:
        worst_curv = worst_op = worst_cocycle = 0.0
        for _ in range(SUITE_CASES):
            case = random_case(rng, operator, config.n)
            lhs_alpha = case.alpha * 1.01 if corrupt else None
            curv, op = covariance_residual(case, lhs_alpha)
            worst_curv, worst_op = max(worst_curv, curv), max(worst_op, op)
            worst_cocycle = max(
                worst_cocycle,
                cocycle_residual(
                    case.base,
                    case.phi,
                    random_positive(rng, config.n),
                    operator,
                    case.alpha,
                    case.psi,
                ),
            )
        out.at_most(f"{operator}.curvature", worst_curv, COVARIANCE_TOL)
        out.at_most(f"{operator}.operator", worst_op, COVARIANCE_TOL)
        out.at_most(f"{operator}.cocycle", worst_cocycle, COVARIANCE_TOL)
        coarse, fine = spectral_decay(operator, config.seed)
        out.at_most(f"{operator}.spectral_decay", fine, max(coarse, roundoff_floor(512, 4)))
    psi = random_test_function(rng, config.n)
    shift = -psi.min() + 1.0
    for variant in PVariant:
        defect = shift_linearity_check(psi, shift, variant=variant)
        out.at_most(f"shift_linearity.{variant}", defect, SHIFT_TOL)
    return {"cases_per_operator": SUITE_CASES}


def _identities_suite(config: RunConfig, corrupt: bool, out: _Collector) -> _Notes:
    rng = np.random.default_rng(config.seed)
    worst_pointwise = worst_total = worst_divergence = worst_total_q = 0.0
    for index in range(SUITE_CASES):
        g = ConformalMetric(random_positive(rng, config.n), Convention.POW43)
        alpha = (1.0, 4.0)[index % 2] if index < 2 else float(rng.uniform(0.5, 5.0))
        worst_pointwise = max(
            worst_pointwise, q_alpha_identity_residual(g, alpha, alpha + 0.01 if corrupt else None)
        )
        lhs, rhs = total_Q_identity(g, alpha)
        worst_total = max(worst_total, abs(lhs - rhs) / abs(rhs))
        divergence = abs(divergence_term(g, alpha)) / max(1.0, abs(rhs))
        worst_divergence = max(worst_divergence, divergence)
        total_q = functionals.evaluate(FunctionalKind.TOTAL_Q, g.factor)
        _, k_squared = total_Q_identity(g, 4.0)
        worst_total_q = max(worst_total_q, abs(total_q - k_squared) / abs(k_squared))
    out.at_most("Q_alpha.pointwise", worst_pointwise, IDENTITY_TOL)
    out.at_most("Q_alpha.total", worst_total, IDENTITY_TOL)
    out.at_most("Q_alpha.divergence", worst_divergence, IDENTITY_TOL)
    out.at_most("TOTAL_Q.k_squared", worst_total_q, IDENTITY_TOL)

    for family in Family:
        member = extremals.sample(ExtremalParams(family, 1.0, 2.0, 0.5), config.n)
        _, residual = extremals.el_residual(member, family)
        out.at_most(f"euler_lagrange.{family}", residual, EXTREMAL_TOL)
    qext = extremals.sample(ExtremalParams(Family.QEXT, 1.0, 2.0, 0.0), config.n)
    out.at_most("greens.QEXT", extremals.greens_residual(qext), EXTREMAL_TOL)
    bs_member = extremals.sample(ExtremalParams(Family.BS, 1.0, 2.0, 0.0), config.n)
    bridge = extremals.half_angle_bridge(bs_member)
    out.at_most("half_angle.minus3", bridge.residual_minus3, EXTREMAL_TOL)
    return {
        "cases": SUITE_CASES,
        "half_angle_exponent": bridge.satisfied_exponent,
        "half_angle_minus2_residual": bridge.residual_minus2,
    }


def _projected_ensemble(
    kind: FunctionalKind, rng: np.random.Generator, n: int, size: int
) -> list[PeriodicFunction]:
    members = [PeriodicFunction.constant(1.0, n)]
    while len(members) < size:
        members.append(functionals.project_to_constraints(kind, random_positive(rng, n)))
    return members


def _inequalities_suite(config: RunConfig, corrupt: bool, out: _Collector) -> _Notes:
    rng = np.random.default_rng(config.seed)
    notes: _Notes = {"ensemble_size": config.ensemble_size}
    for kind in (FunctionalKind.J_BS, FunctionalKind.Y_YAMABE, FunctionalKind.F_Q):
        sharp = functionals.sharp_constant(kind)
        assert sharp is not None
        bound = sharp + (0.01 * abs(sharp) if corrupt else 0.0)
        ensemble = _projected_ensemble(kind, rng, config.n, config.ensemble_size)
        values = np.array([functionals.evaluate(kind, u) for u in ensemble])
        shortfall = float(np.max((bound - values) / abs(sharp)))
        out.at_most(f"{kind}.bound", max(shortfall, 0.0), BOUND_SLACK)
        notes[f"{kind}.min_value"] = float(values.min())

    conjectured = functionals.sharp_constant(FunctionalKind.F_SYMQ)
    assert conjectured is not None
    values = np.array(
        [
            functionals.evaluate(FunctionalKind.F_SYMQ, u)
            for u in _projected_ensemble(FunctionalKind.F_SYMQ, rng, config.n, config.ensemble_size)
        ]
    )
    out.at_most("F_SYMQ.positive", 0.0 if values.min() > 0 else 1.0, 0.0)
    notes["F_SYMQ.min_value"] = float(values.min())
    notes["F_SYMQ.conjecture_gap"] = float(values.min() / conjectured - 1.0)
    notes["F_SYMQ.conjecture_violations"] = int(np.sum(values < conjectured * (1.0 - BOUND_SLACK)))

    worst_gap = math.inf
    for _ in range(SUITE_CASES):
        coeffs = fourier_coeffs(random_positive(rng, config.n))
        coeffs.a[0] = coeffs.b[0] = 0.0
        lhs, rhs = functionals.fourier_lower_bound(from_coeffs(coeffs))
        worst_gap = min(worst_gap, lhs - rhs)
    out.at_most("F_Q.fourier_bound", max(-worst_gap, 0.0), 0.0)
    return notes


_SUITES = {
    "covariance": _covariance_suite,
    "identities": _identities_suite,
    "inequalities": _inequalities_suite,
}

SUITE_NAMES: tuple[str, ...] = tuple(_SUITES)


def run_suite(name: str, config: RunConfig, corrupt: bool = False) -> SuiteReport:
    """Run one named suite; ``corrupt`` perturbs a coefficient as a negative control.

    Raises:
        ValueError: If ``name`` is not a known suite.
    """
    try:
        suite = _SUITES[name]
    except KeyError:
        raise ValueError(f"Unknown suite {name!r}; expected one of {', '.join(_SUITES)}") from None
    collector = _Collector()
    notes = suite(config, corrupt, collector)
    passed = all(check.passed for check in collector.checks)
    _logger.info(
        "[Verify] suite %s: %d checks, %s",
        name,
        len(collector.checks),
        "passed" if passed else "FAILED",
    )
    return SuiteReport(name=name, passed=passed, checks=collector.checks, notes=notes)

