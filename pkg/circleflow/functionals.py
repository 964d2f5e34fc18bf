"""Product functionals of the sharp inequalities, their gradients and moment constraints.

Every kind has the shape E(u) = A(u) · B(u)^m with

    A(u) = ∫ (c2 u_θθ² + c1 u_θ² + c0 u²) dθ,   B(u) = ∫ u^p dθ.

TOTAL_Q is the bare quadratic form (m = 0): ∫Q_g dS_g for g = u^(−4/3) g_s,
integrated by parts.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
import logging
import math

import numpy as np

from circleflow.errors import ConvergenceFailure
from circleflow.spectral_core import (
    FloatArray,
    PeriodicFunction,
    check_positive,
    differentiate,
    fourier_coeffs,
    integrate,
    power,
)

_logger: logging.Logger = logging.getLogger(__name__)

PI = math.pi
FIRST_HARMONIC_TOL = 1e-9
PROJECTION_TOL = 1e-11
STALL_FACTOR = 10.0


class FunctionalKind(StrEnum):
    """The sharp-inequality functionals and the total Q-curvature."""

    J_BS = "J_BS"
    Y_YAMABE = "Y_YAMABE"
    F_SYMQ = "F_SYMQ"
    F_Q = "F_Q"
    TOTAL_Q = "TOTAL_Q"


@dataclass(frozen=True)
class ConstraintSet:
    """Moment constraints ∫ trig(kθ) · u^exponent dθ = 0 for each (trig, k)."""

    moments: tuple[tuple[str, int], ...]
    exponent: float

    def __len__(self) -> int:
        return len(self.moments)

    def weights(self, theta: FloatArray) -> list[FloatArray]:
        """Return the trigonometric weight of each moment on ``theta``."""
        return [
            np.cos(k * theta) if trig == "cos" else np.sin(k * theta) for trig, k in self.moments
        ]


@dataclass(frozen=True)
class FunctionalShape:
    """Coefficients fixing one functional kind."""

    c2: float
    c1: float
    c0: float
    p: float
    m: int
    constraints: ConstraintSet
    sharp: float | None

    @property
    def order(self) -> int:
        """Highest derivative appearing in the quadratic form."""
        return 2 if self.c2 else 1


_NO_CONSTRAINTS = ConstraintSet((), 0.0)

SHAPES: dict[FunctionalKind, FunctionalShape] = {
    FunctionalKind.J_BS: FunctionalShape(
        0.0, 1.0, -1.0, -2.0, 1, ConstraintSet((("cos", 1), ("sin", 1)), -3.0), -4.0 * PI**2
    ),
    FunctionalKind.Y_YAMABE: FunctionalShape(0.0, 1.0, -0.25, -2.0, 1, _NO_CONSTRAINTS, -(PI**2)),
    FunctionalKind.F_SYMQ: FunctionalShape(
        1.0,
        -10.0,
        9.0,
        -2.0 / 3.0,
        3,
        ConstraintSet((("cos", 3), ("sin", 3), ("cos", 1), ("sin", 1)), -5.0 / 3.0),
        144.0 * PI**4,
    ),
    FunctionalKind.F_Q: FunctionalShape(
        1.0, -2.5, 9.0 / 16.0, -2.0 / 3.0, 3, _NO_CONSTRAINTS, 9.0 * PI**4
    ),
    FunctionalKind.TOTAL_Q: FunctionalShape(
        16.0 / 9.0, -40.0 / 9.0, 1.0, 1.0, 0, _NO_CONSTRAINTS, None
    ),
}


def shape(kind: FunctionalKind) -> FunctionalShape:
    """Return the coefficients of ``kind``."""
    return SHAPES[FunctionalKind(kind)]


def sharp_constant(kind: FunctionalKind) -> float | None:
    """Return the sharp lower bound of ``kind``; F_SYMQ's value is conjectured."""
    return shape(kind).sharp


def quadratic_part(kind: FunctionalKind, u: PeriodicFunction) -> float:
    """Return A(u), computed with spectral derivatives."""
    s = shape(kind)
    total = s.c0 * integrate(u * u)
    if s.c1:
        du = differentiate(u)
        total += s.c1 * integrate(du * du)
    if s.c2:
        d2u = differentiate(u, 2)
        total += s.c2 * integrate(d2u * d2u)
    return total


def mass(kind: FunctionalKind, u: PeriodicFunction) -> float:
    """Return B(u) = ∫u^p.

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    check_positive(u, context=f"{kind} mass")
    return integrate(power(u, shape(kind).p))


def evaluate(kind: FunctionalKind, u: PeriodicFunction) -> float:
    """Return E(u) = A(u)·B(u)^m.

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    s = shape(kind)
    check_positive(u, context=f"evaluate {kind}")
    if s.m == 0:
        return quadratic_part(kind, u)
    return quadratic_part(kind, u) * mass(kind, u) ** s.m


def quadratic_gradient(kind: FunctionalKind, u: PeriodicFunction) -> PeriodicFunction:
    """Return the L² gradient of A: 2(c2 u'''' − c1 u'' + c0 u)."""
    s = shape(kind)
    grad = s.c0 * u
    if s.c1:
        grad = grad - s.c1 * differentiate(u, 2)
    if s.c2:
        grad = grad + s.c2 * differentiate(u, 4)
    return 2.0 * grad


def gradient(kind: FunctionalKind, u: PeriodicFunction) -> PeriodicFunction:
    """Return the L² first variation of E = A·B^m.

    grad E = B^m grad A + m A B^(m−1) p u^(p−1).

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    s = shape(kind)
    check_positive(u, context=f"gradient {kind}")
    grad_a = quadratic_gradient(kind, u)
    if s.m == 0:
        return grad_a
    a = quadratic_part(kind, u)
    b = mass(kind, u)
    return b**s.m * grad_a + (s.m * a * b ** (s.m - 1) * s.p) * power(u, s.p - 1.0)


def constraint_residuals(kind: FunctionalKind, u: PeriodicFunction) -> FloatArray:
    """Return the moment values ∫ w_m u^q dθ; empty for unconstrained kinds.

    The moments use nodal powers, the same discretization
    :func:`project_to_constraints` zeroes.

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    constraints = shape(kind).constraints
    if not len(constraints):
        return np.zeros(0)
    check_positive(u, context=f"{kind} constraints")
    weighted = PeriodicFunction(u.values**constraints.exponent)
    return np.array([integrate(weighted * w) for w in constraints.weights(u.theta)])


def constraint_gradients(kind: FunctionalKind, u: PeriodicFunction) -> list[PeriodicFunction]:
    """Return the L² gradients q w_m u^(q−1) of each moment."""
    constraints = shape(kind).constraints
    if not len(constraints):
        return []
    check_positive(u, context=f"{kind} constraint gradients")
    q = constraints.exponent
    base = PeriodicFunction(q * u.values ** (q - 1.0))
    return [base * w for w in constraints.weights(u.theta)]


def project_to_constraints(
    kind: FunctionalKind,
    u: PeriodicFunction,
    tol: float = PROJECTION_TOL,
    max_iter: int = 50,
) -> PeriodicFunction:
    """Move ``u`` onto the constraint set by exponential tilting.

    Writes v = u^q and solves for β so that v·exp(β·w) has vanishing moments;
    β minimizes the strictly convex Φ(β) = ∫ v exp(β·w), so damped Newton
    converges and the result u·exp(β·w / q) stays positive.

    Raises:
        ConvergenceFailure: If Newton does not reach ``tol``.
    """
    constraints = shape(kind).constraints
    if not len(constraints):
        return u
    check_positive(u, context=f"{kind} projection")
    q = constraints.exponent
    weights = np.array(constraints.weights(u.theta))
    v = u.values**q
    dtheta = 2.0 * PI / u.n
    scale = dtheta * float(np.sum(v))
    beta = np.zeros(len(constraints))

    def phi(b: FloatArray) -> tuple[float, FloatArray, FloatArray]:
        tilted = v * np.exp(b @ weights)
        grad = dtheta * (weights @ tilted)
        hess = dtheta * (weights * tilted) @ weights.T
        return dtheta * float(np.sum(tilted)), grad, hess

    value, grad, hess = phi(beta)
    target = tol * scale
    for _ in range(max_iter + 1):
        residual = float(np.max(np.abs(grad)))
        if residual <= target:
            break
        step = np.linalg.solve(hess, -grad)
        t = 1.0
        while True:
            trial = beta + t * step
            trial_value, trial_grad, trial_hess = phi(trial)
            decreased = trial_value <= value + 1e-4 * t * float(grad @ step)
            # near the root Φ changes below rounding, so gradient decrease also counts
            if decreased or float(np.max(np.abs(trial_grad))) < 0.5 * residual:
                break
            t *= 0.5
            if t < 1e-10:
                break
        if t < 1e-10:
            # no further decrease is resolvable in floating point
            if residual <= STALL_FACTOR * target:
                break
            raise ConvergenceFailure(
                f"Constraint projection for {kind} stalled at residual {residual / scale:.3e}"
            )
        beta, value, grad, hess = trial, trial_value, trial_grad, trial_hess
    else:
        raise ConvergenceFailure(f"Constraint projection for {kind} did not converge")
    return PeriodicFunction(u.values * np.exp((beta @ weights) / q))


def fourier_lower_bound(u: PeriodicFunction) -> tuple[float, float]:
    """Return the F_Q quadratic part and its coercive minorant from Fourier coefficients.

    lhs = π Σ (k⁴ − (5/2)k² + 9/16)(a_k² + b_k²) + (9π/8) c0²
    rhs = (π/4) Σ_{k≥2} k⁴(a_k² + b_k²) + (9π/8) c0²

    Raises:
        ValueError: If the first harmonic of ``u`` does not vanish.
    """
    coeffs = fourier_coeffs(u)
    a1, b1 = coeffs.harmonic(1)
    if max(abs(a1), abs(b1)) > FIRST_HARMONIC_TOL * max(1.0, abs(coeffs.c0)):
        raise ValueError(f"First harmonic must vanish, got a1={a1:.3e}, b1={b1:.3e}")
    k = np.arange(1, coeffs.a.size + 1, dtype=np.float64)
    energy = coeffs.a**2 + coeffs.b**2
    constant = 9.0 * PI / 8.0 * coeffs.c0**2
    # the Nyquist cosine has no resolved derivative; only its u² term survives
    nyquist = 9.0 / 16.0 * 2.0 * PI * coeffs.nyquist**2
    lhs = PI * float(np.sum((k**4 - 2.5 * k**2 + 9.0 / 16.0) * energy)) + constant + nyquist
    rhs = PI / 4.0 * float(np.sum((k[1:] ** 4) * energy[1:])) + constant
    return lhs, rhs
