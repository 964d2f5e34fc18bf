"""Constrained minimization of the sharp functionals and the interval problem.

The interval problem minimizes ∫_{−r}^{r} w'² dy over positive w with
w(±r) = b and ∫ w^(−2) dy = a. Its minimizers solve w'' = τ w^(−3) and fall
into three cases decided by the sign of a − 2r/b²; ``solve_local`` gives the
closed form and ``local_oracle`` a direct discretization used to check it.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
import logging
import math

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import brentq

from circleflow import functionals
from circleflow.errors import ConvergenceFailure, PositivityViolation
from circleflow.functionals import FunctionalKind
from circleflow.spectral_core import (
    POSITIVITY_FLOOR,
    TWO_PI,
    FloatArray,
    PeriodicFunction,
    check_positive,
    differentiate,
    fourier_multiply,
    integrate,
    power,
)
from circleflow.transforms import center

_logger: logging.Logger = logging.getLogger(__name__)

FLAT_RTOL = 1e-12
ROOT_XTOL = 1e-14
_BETA_LO = 1e-12
_BETA_HI = math.pi / 2.0 - 1e-12
_BETA_CAP = 1024.0


class LocalCase(StrEnum):
    """Which branch of the interval problem applies."""

    TAU_POS = "tau_pos"
    TAU_NEG = "tau_neg"
    FLAT = "flat"


@dataclass(frozen=True)
class LocalProblem:
    """Mass a of w^(−2), boundary value b and half-width r of the interval."""

    a: float
    b: float
    r: float

    def __post_init__(self) -> None:
        for name in ("a", "b", "r"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"LocalProblem.{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def flat_mass(self) -> float:
        """The mass 2r/b² of the constant function b."""
        return 2.0 * self.r / (self.b * self.b)


@dataclass(frozen=True)
class LocalSolution:
    """Closed-form answer to a :class:`LocalProblem`."""

    problem: LocalProblem
    case: LocalCase
    tau: float
    lam: float
    infimum: float

    def minimizer(self, y: ArrayLike) -> FloatArray:
        """Evaluate the minimizer on points of [−r, r]."""
        points = np.asarray(y, dtype=np.float64)
        if self.case is LocalCase.FLAT:
            return np.full(points.shape, self.problem.b)
        root = abs(self.tau) ** 0.25
        if self.case is LocalCase.TAU_POS:
            return root * np.sqrt((self.lam**2 + points**2) / self.lam)
        return root * np.sqrt((self.lam**2 - points**2) / self.lam)


def _bracket_root(func: Callable[[float], float], lo: float, hi: float, label: str) -> float:
    if func(lo) * func(hi) > 0:
        raise ConvergenceFailure(f"No root of the {label} relation in [{lo:.3e}, {hi:.3e}]")
    return float(brentq(func, lo, hi, xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps, maxiter=500))


def solve_local(p: LocalProblem) -> LocalSolution:
    """Solve the interval problem in closed form.

    The unknowns reduce to β with ab²/(4r) = β/sin 2β (τ > 0) or
    β/sinh 2β (τ < 0); then λ = r/tan β (resp. r/tanh β), τ = ±4β²/a².

    Raises:
        ConvergenceFailure: If the reduced relation has no bracketed root.
    """
    flat = p.flat_mass
    if abs(p.a - flat) <= FLAT_RTOL * flat:
        return LocalSolution(p, LocalCase.FLAT, tau=0.0, lam=math.inf, infimum=0.0)
    target = p.a * p.b * p.b / (4.0 * p.r)
    if p.a > flat:

        def gap(beta: float) -> float:
            return beta / math.sin(2.0 * beta) - target

        beta = _bracket_root(gap, _BETA_LO, _BETA_HI, "arctan")
        lam = p.r / math.tan(beta)
        infimum = 4.0 * beta / p.a * (math.tan(beta) - beta)
        solution = LocalSolution(p, LocalCase.TAU_POS, 4.0 * beta**2 / p.a**2, lam, infimum)
    else:

        def gap(beta: float) -> float:
            # β/sinh 2β written with exp(−2β) so large β underflows instead of overflowing
            return 2.0 * beta * math.exp(-2.0 * beta) / -math.expm1(-4.0 * beta) - target

        hi = 1.0
        while gap(hi) > 0 and hi < _BETA_CAP:
            hi *= 2.0
        beta = _bracket_root(gap, _BETA_LO, hi, "arctanh")
        lam = p.r / math.tanh(beta)
        infimum = 4.0 * beta / p.a * (beta - math.tanh(beta))
        solution = LocalSolution(p, LocalCase.TAU_NEG, -4.0 * beta**2 / p.a**2, lam, infimum)
    _logger.debug(
        "[Local] %s: tau=%.12g lambda=%.12g infimum=%.12g",
        solution.case,
        solution.tau,
        solution.lam,
        solution.infimum,
    )
    return solution


def local_oracle(p: LocalProblem, m: int = 512, max_outer: int = 60, max_inner: int = 100) -> float:
    """Minimize the discretized interval problem directly and return its infimum.

    w lives on m interior nodes of (−r, r) with w = b at both ends. The
    Dirichlet energy Σ(Δw)²/h is minimized subject to the trapezoid mass
    h b^(−2) + h Σ w_i^(−2) = a by an augmented Lagrangian whose inner
    problem is solved by damped Newton.

    Raises:
        ValueError: If ``m`` is below 64.
        ConvergenceFailure: If the mass constraint is not met.
    """
    if m < 64:
        raise ValueError(f"Oracle grid must have at least 64 nodes, got {m}")
    h = 2.0 * p.r / (m + 1)
    b = p.b
    boundary = h / (b * b)
    spare = (p.a - boundary) / (m * h)
    w = np.full(m, 1.0 / math.sqrt(spare) if spare > 0 else b)

    stiffness = (
        np.diag(np.full(m, 2.0)) - np.diag(np.ones(m - 1), 1) - np.diag(np.ones(m - 1), -1)
    ) * (2.0 / h)
    edge = np.zeros(m)
    edge[0] = edge[-1] = 2.0 * b / h

    def energy(x: FloatArray) -> float:
        diffs = np.diff(np.concatenate(([b], x, [b])))
        return float(np.sum(diffs * diffs) / h)

    def mass(x: FloatArray) -> float:
        return boundary + h * float(np.sum(x**-2))

    mu = 0.0
    rho = 10.0
    violation = abs(mass(w) - p.a)
    for outer in range(max_outer):

        def lagrangian(x: FloatArray) -> float:
            c = mass(x) - p.a
            return energy(x) - mu * c + 0.5 * rho * c * c

        for _ in range(max_inner):
            c = mass(w) - p.a
            weight = -mu + rho * c
            grad_c = -2.0 * h * w**-3
            grad = stiffness @ w - edge + weight * grad_c
            hess = stiffness + np.diag(weight * 6.0 * h * w**-4) + rho * np.outer(grad_c, grad_c)
            shift = 0.0
            while True:
                try:
                    factor = cho_factor(hess + shift * np.eye(m))
                    break
                except LinAlgError:
                    shift = max(2.0 * shift, 1e-8 * float(np.max(np.abs(np.diag(hess)))))
            step = -cho_solve(factor, grad)
            t = 1.0
            while np.min(w + t * step) <= 0:
                t *= 0.5
            current = lagrangian(w)
            while t > 1e-12 and lagrangian(w + t * step) > current + 1e-4 * t * float(grad @ step):
                t *= 0.5
            if t <= 1e-12:
                break
            w = w + t * step
            if float(np.max(np.abs(t * step))) <= 1e-12 * float(np.max(w)):
                break
        new_violation = abs(mass(w) - p.a)
        mu -= rho * (mass(w) - p.a)
        if new_violation <= 1e-12 * p.a:
            _logger.debug("[Oracle] converged after %d outer iterations", outer + 1)
            return energy(w)
        if new_violation > 0.25 * violation:
            rho = min(rho * 10.0, 1e10)
        violation = new_violation
    if violation <= 1e-9 * p.a:
        return energy(w)
    raise ConvergenceFailure(f"Local oracle mass mismatch {violation:.3e} after {max_outer} rounds")


def rearrange(u: PeriodicFunction) -> PeriodicFunction:
    """Return the symmetric-decreasing rearrangement of the nodal values.

    The largest value goes to θ = 0 and the following ones alternate between
    θ_k and θ_{−k}, so the profile decreases on [0, π]. The nodal values are
    permuted, so every nodal sum Σ u(θ_j)^p is kept. The rearranged profile is
    only Lipschitz, so dealiased integrals such as ``integrate(power(u, p))``
    agree with the original only to quadrature accuracy.
    """
    check_positive(u, context="rearrange")
    ordered = np.sort(u.values)[::-1]
    n = u.n
    out = np.empty(n)
    out[0] = ordered[0]
    k = np.arange(1, n // 2)
    out[k] = ordered[2 * k - 1]
    out[n - k] = ordered[2 * k]
    out[n // 2] = ordered[n - 1]
    return PeriodicFunction(out)


@dataclass(frozen=True)
class MinimizeOptions:
    """Tolerances and switches for :func:`minimize`."""

    gtol: float = 1e-7
    max_iter: int = 100_000
    constraint_tol: float = 1e-8
    log_space: bool = False
    precondition: bool = True
    center_start: bool = True


@dataclass(frozen=True)
class IterationRecord:
    """One accepted iterate of :func:`minimize`."""

    iteration: int
    value: float
    grad_norm: float
    constraint_residual: float


@dataclass(frozen=True)
class MinimizeResult:
    """Outcome of :func:`minimize`."""

    minimizer: PeriodicFunction
    value: float
    constraint_residuals: FloatArray
    iterations: int
    converged: bool
    grad_norm: float
    history: list[IterationRecord] = field(default_factory=list)


def _normalize(kind: FunctionalKind, u: PeriodicFunction) -> PeriodicFunction:
    """Scale u so that ∫u^p = 2π; every minimized functional is scale invariant."""
    p = functionals.shape(kind).p
    return u * (TWO_PI / functionals.mass(kind, u)) ** (1.0 / p)


def _l2(f: PeriodicFunction, g: PeriodicFunction) -> float:
    return integrate(f * g)


def _projected(
    direction: PeriodicFunction,
    normals: list[PeriodicFunction],
    smoothed_normals: list[PeriodicFunction],
) -> PeriodicFunction:
    """Remove from ``direction`` the span of ``smoothed_normals`` so that ⟨normal_i, ·⟩ = 0."""
    if not normals:
        return direction
    gram = np.array([[_l2(n_i, s_j) for s_j in smoothed_normals] for n_i in normals])
    rhs = np.array([_l2(n_i, direction) for n_i in normals])
    coeffs = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    out = direction
    for c, s in zip(coeffs, smoothed_normals, strict=True):
        out = out - float(c) * s
    return out


def minimize(
    kind: FunctionalKind,
    u0: PeriodicFunction,
    opts: MinimizeOptions | None = None,
) -> MinimizeResult:
    """Minimize a scale-invariant functional from ``u0`` by projected gradient descent.

    The gradient is smoothed by the Sobolev preconditioner 1/(1 + k^(2s))
    (s = order of the functional), projected onto the tangent space of the
    moment constraints and followed by an Armijo line search; every trial is
    pulled back onto the constraints by exponential tilting and renormalized
    to ∫u^p = 2π. The reported gradient norm is relative to max(1, |E|).

    Raises:
        ValueError: For TOTAL_Q, which is not scale invariant.
        PositivityViolation: If ``u0`` is not positive.
        ConvergenceFailure: If the iteration cap is reached.
    """
    kind = FunctionalKind(kind)
    if kind is FunctionalKind.TOTAL_Q:
        raise ValueError("TOTAL_Q is not scale invariant and cannot be minimized here")
    opts = opts or MinimizeOptions()
    s = functionals.shape(kind)
    check_positive(u0, context=f"minimize {kind} start")
    u = u0
    if kind is FunctionalKind.F_Q and opts.center_start:
        _, u = center(u)
    u = _normalize(kind, functionals.project_to_constraints(kind, u))

    order = s.order

    def smooth(f: PeriodicFunction) -> PeriodicFunction:
        if not opts.precondition:
            return f
        return fourier_multiply(f, lambda k: 1.0 / (1.0 + k ** (2 * order)))

    value = functionals.evaluate(kind, u)
    history: list[IterationRecord] = []
    step = 1.0
    grad_norm = math.inf
    for iteration in range(opts.max_iter + 1):
        grad = functionals.gradient(kind, u)
        normals = functionals.constraint_gradients(kind, u)
        if opts.log_space:
            grad = grad * u
            normals = [n_i * u for n_i in normals]
        tangent = _projected(grad, normals, normals)
        grad_norm = tangent.sup_norm() / max(1.0, abs(value))
        residual = float(np.max(np.abs(functionals.constraint_residuals(kind, u)), initial=0.0))
        history.append(IterationRecord(iteration, value, grad_norm, residual))
        _logger.debug(
            "[Minimize] %s iter %d value=%.15g grad=%.3e constraint=%.2e",
            kind,
            iteration,
            value,
            grad_norm,
            residual,
        )
        if grad_norm < opts.gtol and residual < opts.constraint_tol:
            return _finish(kind, u, value, iteration, True, grad_norm, history)
        if iteration == opts.max_iter:
            break

        direction = -_projected(smooth(grad), normals, [smooth(n_i) for n_i in normals])
        slope = _l2(grad, direction)
        if slope >= 0:
            _logger.warning("[Minimize] %s lost descent at iteration %d", kind, iteration)
            return _finish(kind, u, value, iteration, grad_norm < opts.gtol, grad_norm, history)

        t = min(step * 2.0, 1e8)
        accepted = False
        while t > 1e-16:
            if opts.log_space:
                trial_values = u.values * np.exp(np.clip(t * direction.values, -50.0, 50.0))
            else:
                trial_values = u.values + t * direction.values
            if np.min(trial_values) > POSITIVITY_FLOOR:
                try:
                    raw = PeriodicFunction(trial_values)
                    tilted = functionals.project_to_constraints(kind, raw)
                    trial = _normalize(kind, tilted)
                    trial_value = functionals.evaluate(kind, trial)
                except (PositivityViolation, ConvergenceFailure, FloatingPointError):
                    trial_value = math.inf
                if trial_value <= value + 1e-4 * t * slope and trial_value <= value:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            _logger.warning(
                "[Minimize] %s line search stalled at iteration %d (grad=%.3e)",
                kind,
                iteration,
                grad_norm,
            )
            return _finish(kind, u, value, iteration, grad_norm < opts.gtol, grad_norm, history)
        u, value, step = trial, trial_value, t

    raise ConvergenceFailure(
        f"minimize {kind} hit the iteration cap {opts.max_iter} (grad={grad_norm:.3e})"
    )


def _finish(
    kind: FunctionalKind,
    u: PeriodicFunction,
    value: float,
    iterations: int,
    converged: bool,
    grad_norm: float,
    history: list[IterationRecord],
) -> MinimizeResult:
    _logger.info(
        "[Minimize] %s %s after %d iterations: value=%.15g grad=%.3e",
        kind,
        "converged" if converged else "stopped",
        iterations,
        value,
        grad_norm,
    )
    return MinimizeResult(
        minimizer=u,
        value=value,
        constraint_residuals=functionals.constraint_residuals(kind, u),
        iterations=iterations,
        converged=converged,
        grad_norm=grad_norm,
        history=history,
    )


@dataclass(frozen=True)
class MultiplierFit:
    """Least-squares multipliers of the constrained Euler–Lagrange equation.

    ``multipliers`` are relative to |τ|; ``gram_determinant`` is the
    determinant of the normalized Gram matrix of the moment directions.
    """

    tau: float
    multipliers: FloatArray
    residual: float
    gram_determinant: float


def lagrange_multipliers(kind: FunctionalKind, u: PeriodicFunction) -> MultiplierFit:
    """Fit c2 u'''' − c1 u'' + c0 u = τ u^(p−1) + Σ c_m w_m u^(q−1).

    Raises:
        ValueError: For TOTAL_Q, which has no mass term.
        PositivityViolation: If ``u`` is not positive.
    """
    kind = FunctionalKind(kind)
    s = functionals.shape(kind)
    if s.m == 0:
        raise ValueError(f"{kind} has no Euler-Lagrange multiplier")
    check_positive(u, context=f"{kind} multipliers")
    lhs = s.c0 * u
    if s.c1:
        lhs = lhs - s.c1 * differentiate(u, 2)
    if s.c2:
        lhs = lhs + s.c2 * differentiate(u, 4)
    columns = [power(u, s.p - 1.0).values]
    moments = []
    if len(s.constraints):
        base = power(u, s.constraints.exponent - 1.0).values
        moments = [base * w for w in s.constraints.weights(u.theta)]
        columns.extend(moments)
    basis = np.column_stack(columns)
    coeffs = np.linalg.lstsq(basis, lhs.values, rcond=None)[0]
    defect = lhs.values - basis @ coeffs
    residual = float(np.max(np.abs(defect))) / max(1.0, lhs.sup_norm())
    tau = float(coeffs[0])
    if moments:
        unit = np.column_stack([m_i / np.linalg.norm(m_i) for m_i in moments])
        gram_det = float(np.linalg.det(unit.T @ unit))
    else:
        gram_det = 1.0
    scale = max(abs(tau), np.finfo(float).tiny)
    return MultiplierFit(tau, np.asarray(coeffs[1:]) / scale, residual, gram_det)
