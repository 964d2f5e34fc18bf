"""Tests for the interval problem and the projected minimizer."""

import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from circleflow.errors import PositivityViolation
from circleflow.functionals import FunctionalKind, constraint_residuals, mass, sharp_constant
from circleflow.optimize import (
    LocalCase,
    LocalProblem,
    MinimizeOptions,
    lagrange_multipliers,
    local_oracle,
    minimize,
    rearrange,
    solve_local,
)
from circleflow.spectral_core import (
    PeriodicFunction,
    from_trig_coefficients,
    integrate,
    power,
    random_positive,
)

POS = LocalProblem(a=math.pi / 2, b=math.sqrt(2.0), r=1.0)
NEG = LocalProblem(a=2 * math.atanh(0.5), b=math.sqrt(1.5), r=1.0)
FLAT = LocalProblem(a=2.0 / 1.5, b=math.sqrt(1.5), r=1.0)


@pytest.mark.parametrize("field", ["a", "b", "r"])
def test_local_problem_rejects_non_positive(field: str) -> None:
    """Refuse zero or negative data."""
    values = {"a": 1.0, "b": 1.0, "r": 1.0, field: 0.0}
    with pytest.raises(ValueError, match=f"LocalProblem.{field}"):
        LocalProblem(**values)


@pytest.mark.parametrize(
    ("problem", "case", "infimum", "tau", "lam"),
    [
        (POS, LocalCase.TAU_POS, 2 - math.pi / 2, 1.0, 1.0),
        (NEG, LocalCase.TAU_NEG, 2 * (math.atanh(0.5) - 0.5), -1.0, 2.0),
    ],
)
def test_solve_local_closed_form(
    problem: LocalProblem, case: LocalCase, infimum: float, tau: float, lam: float
) -> None:
    """Recover the known branch, infimum, multiplier and scale."""
    solution = solve_local(problem)
    assert solution.case is case
    assert solution.infimum == pytest.approx(infimum, rel=1e-12)
    assert solution.tau == pytest.approx(tau, rel=1e-12)
    assert solution.lam == pytest.approx(lam, rel=1e-12)


def test_solve_local_flat_case() -> None:
    """Return the constant b with zero energy at the flat mass."""
    solution = solve_local(FLAT)
    assert solution.case is LocalCase.FLAT
    assert solution.infimum == 0.0
    assert np.allclose(solution.minimizer(np.linspace(-1, 1, 5)), FLAT.b)


def test_solve_local_tiny_boundary_value_does_not_overflow() -> None:
    """Bracket the arctanh relation far out without overflowing sinh."""
    problem = LocalProblem(a=1.0, b=1e-120, r=1.0)
    solution = solve_local(problem)
    assert solution.case is LocalCase.TAU_NEG
    assert math.isfinite(solution.infimum)
    beta = problem.a * math.sqrt(-solution.tau) / 2.0
    assert beta > 256.0
    target = problem.a * problem.b**2 / (4.0 * problem.r)
    assert 2.0 * beta * math.exp(-2.0 * beta) == pytest.approx(target, rel=1e-9)


@pytest.mark.parametrize("problem", [POS, NEG])
def test_minimizer_meets_boundary_and_mass(problem: LocalProblem) -> None:
    """Hit w(±r) = b and ∫w^(−2) = a."""
    solution = solve_local(problem)
    assert np.allclose(solution.minimizer(np.array([-problem.r, problem.r])), problem.b)
    y = np.linspace(-problem.r, problem.r, 20001)
    w = solution.minimizer(y)
    assert trapezoid(w**-2, y) == pytest.approx(problem.a, rel=1e-7)


@pytest.mark.parametrize("problem", [POS, NEG])
def test_minimizer_solves_euler_lagrange(problem: LocalProblem) -> None:
    """Satisfy w'' = τ w^(−3) in the interior."""
    solution = solve_local(problem)
    y = np.linspace(-0.9, 0.9, 7)
    h = 1e-4
    w = solution.minimizer(y)
    second = (solution.minimizer(y + h) - 2 * w + solution.minimizer(y - h)) / h**2
    assert np.allclose(second, solution.tau * w**-3, rtol=1e-5)


@pytest.mark.parametrize("problem", [POS, NEG])
def test_local_oracle_agrees_with_closed_form(problem: LocalProblem) -> None:
    """Match the discretized minimum with the closed form."""
    assert local_oracle(problem) == pytest.approx(solve_local(problem).infimum, abs=2e-3)


def test_local_oracle_rejects_coarse_grid() -> None:
    """Refuse grids below sixty-four nodes."""
    with pytest.raises(ValueError, match="at least 64"):
        local_oracle(POS, m=16)


def test_rearrange_preserves_distribution(rng: np.random.Generator) -> None:
    """Keep the sorted values and every nodal sum of a power."""
    u = random_positive(rng, 64)
    v = rearrange(u)
    assert np.array_equal(np.sort(v.values), np.sort(u.values))
    for p in (-2.0, -2.0 / 3.0, 0.5, 3.0):
        assert np.sum(v.values**p) == pytest.approx(np.sum(u.values**p), rel=1e-13)


def test_rearrange_fixes_symmetric_decreasing_factor() -> None:
    """Return a profile that is already symmetric and decreasing unchanged."""
    u = PeriodicFunction.from_callable(lambda t: np.exp(np.cos(t)), 64)
    v = rearrange(u)
    assert np.allclose(v.values, u.values, rtol=1e-15)
    assert integrate(power(v, -2.0)) == pytest.approx(integrate(power(u, -2.0)), rel=1e-14)


def test_rearrange_is_symmetric_decreasing(rng: np.random.Generator) -> None:
    """Peak at θ = 0 and decrease towards θ = π."""
    v = rearrange(random_positive(rng, 64)).values
    assert v[0] == v.max()
    assert v[32] == v.min()
    assert np.all(np.diff(v[:33]) <= 0)
    assert np.all(np.diff(v[32:]) >= 0)


def test_minimize_yamabe_reaches_sharp_constant() -> None:
    """Descend from a perturbed constant to −π²."""
    u0 = from_trig_coefficients([1.0, 0.2], 64)
    result = minimize(FunctionalKind.Y_YAMABE, u0)
    assert result.converged
    assert result.value == pytest.approx(-(math.pi**2), abs=1e-5)
    assert result.history[0].value >= result.value
    assert mass(FunctionalKind.Y_YAMABE, result.minimizer) == pytest.approx(2 * math.pi)


def test_minimize_j_keeps_constraints(rng: np.random.Generator) -> None:
    """Stay on the moment constraints while approaching −4π²."""
    result = minimize(FunctionalKind.J_BS, random_positive(rng, 64), MinimizeOptions(gtol=1e-6))
    residuals = constraint_residuals(FunctionalKind.J_BS, result.minimizer)
    assert float(np.max(np.abs(residuals))) < 1e-8
    assert result.value >= sharp_constant(FunctionalKind.J_BS) - 1e-8
    assert result.value == pytest.approx(sharp_constant(FunctionalKind.J_BS), rel=1e-4)


def test_minimize_history_is_non_increasing(rng: np.random.Generator) -> None:
    """Accept only descending iterates."""
    result = minimize(
        FunctionalKind.J_BS, random_positive(rng, 64), MinimizeOptions(gtol=1e-4, log_space=True)
    )
    values = [record.value for record in result.history]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:], strict=False))


def test_minimize_rejects_total_q() -> None:
    """Refuse the non-scale-invariant total."""
    with pytest.raises(ValueError, match="not scale invariant"):
        minimize(FunctionalKind.TOTAL_Q, PeriodicFunction.constant(1.0, 32))


def test_minimize_rejects_signed_start() -> None:
    """Refuse a start that is not positive."""
    with pytest.raises(PositivityViolation):
        minimize(FunctionalKind.Y_YAMABE, PeriodicFunction.from_callable(np.cos, 32))


def test_lagrange_multipliers_of_constant() -> None:
    """Read τ = −1 and zero moment multipliers off u ≡ 1."""
    fit = lagrange_multipliers(FunctionalKind.J_BS, PeriodicFunction.constant(1.0, 64))
    assert fit.tau == pytest.approx(-1.0)
    assert np.allclose(fit.multipliers, 0.0, atol=1e-12)
    assert fit.residual < 1e-12
    assert fit.gram_determinant == pytest.approx(1.0)


def test_lagrange_multipliers_reject_total_q() -> None:
    """Refuse the functional without a mass term."""
    with pytest.raises(ValueError, match="no Euler-Lagrange multiplier"):
        lagrange_multipliers(FunctionalKind.TOTAL_Q, PeriodicFunction.constant(1.0, 32))
