"""Möbius-type conformal actions on circle functions and the centering root-find.

The three weighted actions leave the sharp functionals invariant:

* ``T_lambda``:  (T_λ u)(θ) = u(σ_λ(θ)) ψ_λ(θ)
* ``script_T``: (𝒯_{λ,α} u)(θ) = u(ω_{λ,α}(θ)) Ψ_{λ,α}(θ)
* ``bold_T``:   (𝐓_λ u)(θ) = u(σ_λ(θ)) ψ_λ(θ)³

with ψ_λ(θ) = √(λ² cos²θ + λ^(−2) sin²θ), σ_λ' = ψ_λ^(−2),
Ψ_{λ,α}(θ) = ψ_λ((θ − α)/2)³ and ω_{λ,α}(θ) = α + 2σ_λ((θ − α)/2).
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum
import logging
import math

import numpy as np
from numpy.typing import ArrayLike
from scipy.optimize import brentq

from circleflow.errors import ConvergenceFailure
from circleflow.spectral_core import (
    TWO_PI,
    FloatArray,
    PeriodicFunction,
    check_positive,
    compose,
)

_logger: logging.Logger = logging.getLogger(__name__)

CENTER_TOL = 1e-9
CENTER_TARGET = 1e-12
CENTER_MAX_ITER = 200
CENTER_LAMBDA_SEEDS = np.geomspace(1.0, 50.0, 8)
CENTER_ALPHA_SEEDS = TWO_PI * np.arange(16) / 16
_FD_STEP = 1e-6
_ANTIPODAL_TOL = 1e-12


@dataclass(frozen=True)
class MobiusParams:
    """Dilation λ > 0 and angle α, normalized to [0, 2π)."""

    lam: float
    alpha: float = 0.0

    def __post_init__(self) -> None:
        lam = float(self.lam)
        if not (math.isfinite(lam) and lam > 0):
            raise ValueError(f"lambda must be positive and finite, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", float(self.alpha) % TWO_PI)

    def canonical(self) -> MobiusParams:
        """Return the equivalent parameters with λ ≥ 1."""
        if self.lam >= 1.0:
            return self
        return MobiusParams(1.0 / self.lam, self.alpha + math.pi)


class CircleMapKind(StrEnum):
    """Closed-form reparametrizations of the circle."""

    SIGMA = "sigma"
    OMEGA = "omega"


def _wrap(x: FloatArray) -> FloatArray:
    """Map angles into (−π, π]."""
    return math.pi - np.mod(math.pi - x, TWO_PI)


def psi_lambda(theta: ArrayLike, lam: float) -> FloatArray:
    """Return ψ_λ(θ) = √(λ² cos²θ + λ^(−2) sin²θ)."""
    t = np.asarray(theta, dtype=np.float64)
    return np.sqrt(lam * lam * np.cos(t) ** 2 + np.sin(t) ** 2 / (lam * lam))


def sigma(theta: ArrayLike, lam: float) -> FloatArray:
    """Return the unwrapped σ_λ(θ) = ∫₀^θ ψ_λ^(−2); it gains 2π per turn."""
    t = np.asarray(theta, dtype=np.float64)
    principal = np.arctan2(np.sin(t) / lam, lam * np.cos(t))
    return t + _wrap(principal - t)


def omega(theta: ArrayLike, params: MobiusParams) -> FloatArray:
    """Return ω_{λ,α}(θ) = α + 2σ_λ((θ − α)/2)."""
    t = np.asarray(theta, dtype=np.float64)
    return params.alpha + 2.0 * sigma((t - params.alpha) / 2.0, params.lam)


def big_psi(theta: ArrayLike, params: MobiusParams) -> FloatArray:
    """Return Ψ_{λ,α}(θ) = ψ_λ((θ − α)/2)³."""
    t = np.asarray(theta, dtype=np.float64)
    return psi_lambda((t - params.alpha) / 2.0, params.lam) ** 3


@dataclass(frozen=True)
class CircleMap:
    """A degree-one increasing circle map with its derivative."""

    kind: CircleMapKind
    params: MobiusParams

    def __call__(self, theta: ArrayLike) -> FloatArray:
        """Evaluate the unwrapped map."""
        if self.kind is CircleMapKind.SIGMA:
            return sigma(theta, self.params.lam)
        return omega(theta, self.params)

    def derivative(self, theta: ArrayLike) -> FloatArray:
        """Evaluate the map's derivative, ψ_λ^(−2) or Ψ_{λ,α}^(−2/3)."""
        t = np.asarray(theta, dtype=np.float64)
        if self.kind is CircleMapKind.SIGMA:
            return psi_lambda(t, self.params.lam) ** -2
        return psi_lambda((t - self.params.alpha) / 2.0, self.params.lam) ** -2

    def inverse(self) -> CircleMap:
        """Return the inverse map (σ_λ⁻¹ = σ_{1/λ}; ω likewise about α)."""
        return CircleMap(self.kind, MobiusParams(1.0 / self.params.lam, self.params.alpha))


def sigma_map(lam: float) -> CircleMap:
    """Return σ_λ as a :class:`CircleMap`."""
    return CircleMap(CircleMapKind.SIGMA, MobiusParams(lam))


def omega_map(params: MobiusParams) -> CircleMap:
    """Return ω_{λ,α} as a :class:`CircleMap`."""
    return CircleMap(CircleMapKind.OMEGA, params)


def stereographic(theta: ArrayLike) -> FloatArray:
    """Return y = tan(θ/2) for θ in (−π, π).

    Raises:
        ValueError: If any angle lies outside the open interval (the pole).
    """
    t = np.asarray(theta, dtype=np.float64)
    if np.any(np.abs(t) >= math.pi):
        raise ValueError("Stereographic projection is undefined at θ = ±π")
    return np.tan(t / 2.0)


def inverse_stereographic(y: ArrayLike) -> FloatArray:
    """Return θ = 2 arctan y."""
    return 2.0 * np.arctan(np.asarray(y, dtype=np.float64))


def stereographic_pullback(u: PeriodicFunction, y: ArrayLike, weight: float = 1.5) -> FloatArray:
    """Transport ``u`` to the line: v(y) = u(2 arctan y)·((1 + y²)/2)^weight."""
    points = np.asarray(y, dtype=np.float64)
    return u.at(inverse_stereographic(points)) * ((1.0 + points * points) / 2.0) ** weight


def T_lambda(u: PeriodicFunction, lam: float) -> PeriodicFunction:
    """Return (T_λ u)(θ) = u(σ_λ(θ)) ψ_λ(θ).

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    check_positive(u, context="T_lambda")
    params = MobiusParams(lam)
    return compose(u, sigma_map(params.lam)) * psi_lambda(u.theta, params.lam)


def script_T(u: PeriodicFunction, params: MobiusParams) -> PeriodicFunction:
    """Return (𝒯_{λ,α} u)(θ) = u(ω_{λ,α}(θ)) Ψ_{λ,α}(θ).

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    check_positive(u, context="script_T")
    return compose(u, omega_map(params)) * big_psi(u.theta, params)


def bold_T(u: PeriodicFunction, lam: float) -> PeriodicFunction:
    """Return (𝐓_λ u)(θ) = u(σ_λ(θ)) ψ_λ(θ)³.

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    check_positive(u, context="bold_T")
    params = MobiusParams(lam)
    return compose(u, sigma_map(params.lam)) * psi_lambda(u.theta, params.lam) ** 3


def first_moment_transform(lam: float, alpha: float) -> tuple[float, float]:
    """Return (scale, α̃) relating moments before and after T_λ.

    ∫cos(θ + α)(T_λ u)^(−3) dθ = scale · ∫cos(θ + α̃) u^(−3) dθ with
    scale = √(λ^(−2)cos²α + λ² sin²α) and α̃ = σ_{1/λ}(α). The cubic moments
    of 𝐓_λ against u^(−5/3) scale by scale³ with the same α̃.
    """
    lam = MobiusParams(lam).lam
    scale = math.sqrt(math.cos(alpha) ** 2 / lam**2 + lam**2 * math.sin(alpha) ** 2)
    alpha_tilde = float(sigma(alpha, 1.0 / lam))
    return scale, alpha_tilde


def _from_chart(z: FloatArray) -> MobiusParams:
    radius = float(np.hypot(z[0], z[1]))
    return MobiusParams(math.exp(radius), math.atan2(z[1], z[0]) if radius > 0 else 0.0)


def _to_chart(lam: float, alpha: float) -> FloatArray:
    r = math.log(lam)
    return np.array([r * math.cos(alpha), r * math.sin(alpha)])


def first_moments(f: PeriodicFunction) -> FloatArray:
    """Return the normalized moments (1/2π)∫f(θ)(cos θ, sin θ) dθ."""
    theta = f.theta
    return np.array([np.mean(f.values * np.cos(theta)), np.mean(f.values * np.sin(theta))])


def _newton_center(
    residual: Callable[[FloatArray], FloatArray],
    z0: FloatArray,
) -> tuple[FloatArray, float]:
    """Damped Newton on the 2-D moment map with a forward-difference Jacobian."""
    z = z0.copy()
    f = residual(z)
    norm = float(np.max(np.abs(f)))
    for _ in range(CENTER_MAX_ITER):
        if norm < CENTER_TARGET:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            dz = np.zeros(2)
            dz[j] = _FD_STEP
            jac[:, j] = (residual(z + dz) - f) / _FD_STEP
        step = np.linalg.lstsq(jac, -f, rcond=None)[0]
        t = 1.0
        while t > 1e-8:
            trial = z + t * step
            f_trial = residual(trial)
            trial_norm = float(np.max(np.abs(f_trial)))
            if trial_norm < (1.0 - 1e-4 * t) * norm:
                break
            t *= 0.5
        else:
            break
        z, f, norm = trial, f_trial, trial_norm
    return z, norm


def center(u: PeriodicFunction) -> tuple[MobiusParams, PeriodicFunction]:
    """Find (λ, α) such that 𝒯_{λ,α}u has vanishing first moments.

    The root-find runs in the chart z = log λ (cos α, sin α), seeded on a
    λ × α grid ordered by initial residual. The first root found is returned;
    centering parameters are not unique in general.

    Raises:
        PositivityViolation: If ``u`` is not positive.
        ConvergenceFailure: If no seed reaches the tolerance.
    """
    check_positive(u, context="center")
    if float(np.max(np.abs(first_moments(u)))) < CENTER_TOL:
        return MobiusParams(1.0, 0.0), u

    def residual(z: FloatArray) -> FloatArray:
        return first_moments(script_T(u, _from_chart(z)))

    seeds = [_to_chart(lam, alpha) for lam in CENTER_LAMBDA_SEEDS for alpha in CENTER_ALPHA_SEEDS]
    seeds.sort(key=lambda z: float(np.max(np.abs(residual(z)))))
    best = math.inf
    for index, seed in enumerate(seeds):
        z, norm = _newton_center(residual, seed)
        best = min(best, norm)
        if norm < CENTER_TOL:
            params = _from_chart(z).canonical()
            _logger.debug(
                "[Center] seed %d converged: lambda=%.6g alpha=%.6g residual=%.2e",
                index,
                params.lam,
                params.alpha,
                norm,
            )
            return params, script_T(u, params)
    raise ConvergenceFailure(f"Centering failed: best moment residual {best:.3e}")


def antipodal_level(f: PeriodicFunction) -> float:
    """Return an angle a with f(a) = f(a + π).

    g(θ) = f(θ + π) − f(θ) is odd under θ ↦ θ + π, so it changes sign on
    [0, π]; the root is bracketed on the grid and refined on the interpolant.
    """
    half = f.n // 2
    g = np.roll(f.values, -half) - f.values
    scale = max(1.0, f.sup_norm())
    if float(np.max(np.abs(g))) <= 1e-14 * scale:
        return 0.0
    theta = f.theta
    hits = np.flatnonzero(np.abs(g) < _ANTIPODAL_TOL)
    if hits.size:
        return float(theta[hits[0]])
    crossings = np.flatnonzero(g[:-1] * g[1:] < 0)
    if crossings.size == 0:
        # the sign change sits between the last node and the wrap to 2π
        lo, hi = float(theta[-1]), TWO_PI
    else:
        j = int(crossings[0])
        lo, hi = float(theta[j]), float(theta[j + 1])

    def antipodal_gap(x: float) -> float:
        return float(f.at(x + math.pi) - f.at(x))

    root = brentq(antipodal_gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(root) % TWO_PI
