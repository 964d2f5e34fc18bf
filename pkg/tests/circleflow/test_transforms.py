"""Tests for the Möbius-type actions, circle maps and centering."""

import math

import numpy as np
import pytest

from circleflow.errors import PositivityViolation
from circleflow.extremals import ExtremalParams, Family, sample
from circleflow.functionals import FunctionalKind, evaluate
from circleflow.spectral_core import (
    TWO_PI,
    PeriodicFunction,
    from_trig_coefficients,
    grid,
    random_positive,
)
from circleflow.transforms import (
    CircleMapKind,
    MobiusParams,
    T_lambda,
    antipodal_level,
    big_psi,
    bold_T,
    center,
    first_moment_transform,
    first_moments,
    inverse_stereographic,
    omega,
    omega_map,
    psi_lambda,
    script_T,
    sigma,
    sigma_map,
    stereographic,
    stereographic_pullback,
)


@pytest.mark.parametrize("lam", [0.0, -1.0, math.inf, math.nan])
def test_mobius_params_reject_bad_lambda(lam: float) -> None:
    """Refuse non-positive or non-finite dilations."""
    with pytest.raises(ValueError, match="lambda must be positive"):
        MobiusParams(lam)


def test_mobius_params_normalize_angle() -> None:
    """Reduce α into [0, 2π)."""
    assert MobiusParams(2.0, -math.pi / 2).alpha == pytest.approx(1.5 * math.pi)


def test_canonical_flips_small_lambda() -> None:
    """Trade λ < 1 for 1/λ with α shifted by π."""
    params = MobiusParams(0.25, 0.5).canonical()
    assert params.lam == pytest.approx(4.0)
    assert params.alpha == pytest.approx(0.5 + math.pi)
    assert MobiusParams(3.0, 1.0).canonical() == MobiusParams(3.0, 1.0)


def test_psi_is_one_at_unit_lambda() -> None:
    """Reduce ψ_1 to the constant one."""
    assert np.allclose(psi_lambda(grid(32), 1.0), 1.0)


def test_sigma_gains_a_full_turn() -> None:
    """Advance σ_λ by 2π when θ advances by 2π."""
    theta = np.linspace(-3.0, 3.0, 13)
    assert np.allclose(sigma(theta + TWO_PI, 2.5), sigma(theta, 2.5) + TWO_PI)
    assert sigma(0.0, 2.5) == pytest.approx(0.0)


def test_sigma_is_increasing_across_the_seam() -> None:
    """Keep the unwrapped map increasing through θ = π."""
    theta = np.linspace(0.0, TWO_PI, 401)
    assert np.all(np.diff(sigma(theta, 3.0)) > 0)


@pytest.mark.parametrize("kind", list(CircleMapKind))
def test_circle_map_derivative_matches_finite_difference(kind: CircleMapKind) -> None:
    """Match the closed-form derivative with a central difference."""
    params = MobiusParams(1.7, 0.8)
    circle_map = sigma_map(params.lam) if kind is CircleMapKind.SIGMA else omega_map(params)
    theta = np.linspace(0.05, 6.2, 23)
    h = 1e-6
    numeric = (circle_map(theta + h) - circle_map(theta - h)) / (2 * h)
    assert np.allclose(circle_map.derivative(theta), numeric, rtol=1e-7)


@pytest.mark.parametrize("kind", list(CircleMapKind))
def test_circle_map_inverse(kind: CircleMapKind) -> None:
    """Undo each map with its inverse."""
    params = MobiusParams(2.2, 1.1)
    circle_map = sigma_map(params.lam) if kind is CircleMapKind.SIGMA else omega_map(params)
    theta = np.linspace(0.0, 6.0, 17)
    assert np.allclose(circle_map.inverse()(circle_map(theta)), theta, atol=1e-12)


def test_omega_fixes_its_center_angle() -> None:
    """Leave θ = α in place."""
    params = MobiusParams(3.0, 1.2)
    assert omega(params.alpha, params) == pytest.approx(params.alpha)
    assert big_psi(params.alpha, params) == pytest.approx(27.0)


def test_stereographic_round_trip() -> None:
    """Invert y = tan(θ/2) on the open interval."""
    theta = np.linspace(-3.0, 3.0, 11)
    assert np.allclose(inverse_stereographic(stereographic(theta)), theta)


def test_stereographic_rejects_pole() -> None:
    """Refuse the point θ = π."""
    with pytest.raises(ValueError, match="undefined"):
        stereographic(np.array([0.0, math.pi]))


def test_stereographic_pullback_of_constant() -> None:
    """Carry u ≡ 1 to ((1 + y²)/2)^(3/2)."""
    y = np.linspace(-4.0, 4.0, 9)
    got = stereographic_pullback(PeriodicFunction.constant(1.0, 64), y)
    assert np.allclose(got, ((1 + y * y) / 2) ** 1.5)


def test_stereographic_pullback_of_q_extremal() -> None:
    """Carry a QEXT member to the bubble ((λ² + λ^(−2) y²)/2)^(3/2)."""
    u = sample(ExtremalParams(Family.QEXT, 1.0, 2.0, 0.0), 128)
    y = np.linspace(-4.0, 4.0, 17)
    got = stereographic_pullback(u, y)
    assert np.allclose(got, ((4.0 + y * y / 4.0) / 2) ** 1.5, rtol=1e-9)


def test_actions_are_identity_at_unit_lambda(rng: np.random.Generator) -> None:
    """Leave u unchanged when λ = 1."""
    u = random_positive(rng, 128)
    for moved in (T_lambda(u, 1.0), bold_T(u, 1.0), script_T(u, MobiusParams(1.0, 0.7))):
        assert np.max(np.abs(moved.values - u.values)) < 1e-12


def test_t_lambda_inverse_round_trip(rng: np.random.Generator) -> None:
    """Undo T_λ with T_(1/λ)."""
    u = random_positive(rng, 256)
    back = T_lambda(T_lambda(u, 1.6), 1.0 / 1.6)
    assert np.max(np.abs(back.values - u.values)) < 1e-9


@pytest.mark.parametrize(
    ("kind", "move"),
    [
        (FunctionalKind.J_BS, lambda u: T_lambda(u, 1.5)),
        (FunctionalKind.F_SYMQ, lambda u: bold_T(u, 1.3)),
        (FunctionalKind.F_Q, lambda u: script_T(u, MobiusParams(1.4, 0.9))),
    ],
)
def test_actions_preserve_their_functional(kind: FunctionalKind, move) -> None:
    """Keep each sharp functional invariant under its action."""
    u = from_trig_coefficients([1.0, 0.1, -0.05, 0.04, 0.03, 0.0, 0.02], 256)
    before = evaluate(kind, u)
    assert evaluate(kind, move(u)) == pytest.approx(before, rel=1e-8)


def test_actions_require_positive_input() -> None:
    """Refuse signed functions."""
    f = PeriodicFunction.from_callable(np.cos, 32)
    with pytest.raises(PositivityViolation):
        T_lambda(f, 2.0)


def test_first_moment_transform_at_unit_lambda() -> None:
    """Return scale one and the same angle when λ = 1."""
    scale, alpha_tilde = first_moment_transform(1.0, 0.4)
    assert scale == pytest.approx(1.0)
    assert alpha_tilde == pytest.approx(0.4)


def test_first_moment_transform_relates_moments(rng: np.random.Generator) -> None:
    """Relate the cubic-weighted moments before and after T_λ."""
    u = random_positive(rng, 256)
    lam, alpha = 1.8, 0.6
    scale, alpha_tilde = first_moment_transform(lam, alpha)
    theta = u.theta
    moved = T_lambda(u, lam)
    lhs = TWO_PI * np.mean(np.cos(theta + alpha) * moved.values**-3)
    rhs = TWO_PI * np.mean(np.cos(theta + alpha_tilde) * u.values**-3)
    assert lhs == pytest.approx(scale * rhs, rel=1e-8, abs=1e-10)


@pytest.mark.parametrize(
    "move",
    [lambda u: script_T(u, MobiusParams(2.0, 1.0)), lambda u: bold_T(u, 2.0)],
    ids=["script_T", "bold_T"],
)
def test_actions_preserve_two_thirds_mass(move) -> None:
    """Keep ∫u^(−2/3) dθ under the 𝒯 and 𝐓 actions."""
    u = from_trig_coefficients([2.0, 1.0], 256)
    before = TWO_PI * np.mean(u.values ** (-2.0 / 3.0))
    after = TWO_PI * np.mean(move(u).values ** (-2.0 / 3.0))
    assert after == pytest.approx(before, rel=1e-9)


def _cubic_moment(f: PeriodicFunction, alpha: float) -> float:
    return TWO_PI * float(np.mean(np.cos(f.theta + alpha) ** 3 * f.values ** (-5.0 / 3.0)))


def test_bold_t_scales_cubic_moment_at_zero_angle() -> None:
    """Shrink the α = 0 cubic moment by λ^(−3) under 𝐓_λ."""
    u = from_trig_coefficients([2.0, 1.0], 256)
    ratio = _cubic_moment(bold_T(u, 2.0), 0.0) / _cubic_moment(u, 0.0)
    assert ratio == pytest.approx(1.0 / 8.0, rel=1e-8)


def test_bold_t_relates_cubic_moments(rng: np.random.Generator) -> None:
    """Scale cubic moments by the cube of the first-moment factor."""
    u = random_positive(rng, 256)
    lam, alpha = 1.6, 0.9
    scale, alpha_tilde = first_moment_transform(lam, alpha)
    lhs = _cubic_moment(bold_T(u, lam), alpha)
    rhs = _cubic_moment(u, alpha_tilde)
    assert lhs == pytest.approx(scale**3 * rhs, rel=1e-8, abs=1e-10)


def test_center_leaves_centered_function_alone() -> None:
    """Return the identity for a function without first moments."""
    u = from_trig_coefficients([1.0, 0.0, 0.0, 0.2, 0.1], 64)
    params, centered = center(u)
    assert params == MobiusParams(1.0, 0.0)
    assert centered is u


def test_center_kills_first_moments() -> None:
    """Drive both first moments of 𝒯u below tolerance."""
    u = from_trig_coefficients([1.0, 0.35, 0.2, 0.05], 128)
    params, centered = center(u)
    assert params.lam >= 1.0
    assert float(np.max(np.abs(first_moments(centered)))) < 1e-9
    assert centered.min() > 0


def test_antipodal_level_on_cosine() -> None:
    """Find θ = π/2 for cos θ."""
    a = antipodal_level(PeriodicFunction.from_callable(np.cos, 64))
    assert a == pytest.approx(math.pi / 2, abs=1e-12)


def test_antipodal_level_between_nodes() -> None:
    """Refine the crossing off the grid."""
    f = PeriodicFunction.from_callable(lambda t: np.cos(t - 0.3) + 0.2 * np.cos(2 * t), 64)
    a = antipodal_level(f)
    assert float(f.at(a)) == pytest.approx(float(f.at(a + math.pi)), abs=1e-12)


def test_antipodal_level_of_pi_periodic_function() -> None:
    """Return zero when every angle qualifies."""
    f = PeriodicFunction.from_callable(lambda t: np.cos(2 * t), 32)
    assert antipodal_level(f) == 0.0
