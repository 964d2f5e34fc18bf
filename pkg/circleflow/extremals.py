"""Closed-form extremal families, Euler–Lagrange and Green's residuals, family fits.

All four families are powers of ψ_λ² = λ² cos²x + λ^(−2) sin²x, either at the
full angle x = θ − α or at the half angle x = (θ − α)/2. Writing s = log λ,

    ψ_λ² = cosh 2s + sinh 2s · cos 2x,

which is the form :func:`fit_family` works in.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from functools import cache
import logging
import math

import numpy as np
from scipy.optimize import least_squares

from circleflow.errors import ConvergenceFailure
from circleflow.functionals import FunctionalKind
from circleflow.spectral_core import (
    TWO_PI,
    FloatArray,
    PeriodicFunction,
    check_positive,
    differentiate,
    grid,
    power,
)
from circleflow.transforms import psi_lambda

_logger: logging.Logger = logging.getLogger(__name__)

GREENS_OVERSAMPLE = 64


class Family(StrEnum):
    """The extremal families."""

    BS = "BS"
    YAM = "YAM"
    QEXT = "QEXT"
    SYMQ_CONJ = "SYMQ_CONJ"


@dataclass(frozen=True)
class _FamilyShape:
    exponent: float
    full_angle: bool
    # Euler–Lagrange operator c4 ∂⁴ + c2 ∂² + c0 and its right-hand power
    el: tuple[float, float, float]
    el_power: float


_FAMILIES: dict[Family, _FamilyShape] = {
    Family.BS: _FamilyShape(0.5, True, (0.0, 1.0, 1.0), -3.0),
    Family.YAM: _FamilyShape(0.5, False, (0.0, 1.0, 0.25), -3.0),
    Family.QEXT: _FamilyShape(1.5, False, (1.0, 2.5, 9.0 / 16.0), -5.0 / 3.0),
    Family.SYMQ_CONJ: _FamilyShape(1.5, True, (1.0, 10.0, 9.0), -5.0 / 3.0),
}

_SHARP_FAMILY = {
    FunctionalKind.J_BS: Family.BS,
    FunctionalKind.Y_YAMABE: Family.YAM,
    FunctionalKind.F_SYMQ: Family.SYMQ_CONJ,
    FunctionalKind.F_Q: Family.QEXT,
}


def sharp_family(kind: FunctionalKind) -> Family:
    """Return the family on which ``kind`` attains (or is conjectured to attain) its bound.

    Raises:
        ValueError: For TOTAL_Q, which has no extremal family.
    """
    try:
        return _SHARP_FAMILY[FunctionalKind(kind)]
    except KeyError:
        raise ValueError(f"{kind} has no extremal family") from None


@dataclass(frozen=True)
class ExtremalParams:
    """Scale c, dilation λ and angle α of a family member."""

    family: Family
    c: float = 1.0
    lam: float = 1.0
    alpha: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        for name in ("c", "lam"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"ExtremalParams.{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def period(self) -> float:
        """Period of the family in α."""
        return math.pi if _FAMILIES[self.family].full_angle else TWO_PI


def evaluate_family(p: ExtremalParams, theta: FloatArray) -> FloatArray:
    """Evaluate the closed form of a family member at arbitrary angles."""
    s = _FAMILIES[p.family]
    x = theta - p.alpha
    if not s.full_angle:
        x = x / 2.0
    return p.c * psi_lambda(x, p.lam) ** (2.0 * s.exponent)


def sample(p: ExtremalParams, n: int) -> PeriodicFunction:
    """Return the nodal samples of a family member."""
    return PeriodicFunction(evaluate_family(p, grid(n)))


def _el_parts(u: PeriodicFunction, family: Family) -> tuple[PeriodicFunction, PeriodicFunction]:
    s = _FAMILIES[Family(family)]
    c4, c2, c0 = s.el
    lhs = c0 * u + c2 * differentiate(u, 2)
    if c4:
        lhs = lhs + c4 * differentiate(u, 4)
    return lhs, power(u, s.el_power)


def _fit_scalar(target: FloatArray, basis: FloatArray) -> tuple[float, float]:
    tau = float(target @ basis / (basis @ basis))
    defect = float(np.max(np.abs(target - tau * basis)))
    return tau, defect / max(1.0, float(np.max(np.abs(target))))


def el_residual(u: PeriodicFunction, family: Family) -> tuple[float, float]:
    """Fit τ in the family's Euler–Lagrange equation and return (τ, relative sup defect).

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    check_positive(u, context=f"{family} Euler-Lagrange residual")
    lhs, rhs = _el_parts(u, family)
    return _fit_scalar(lhs.values, rhs.values)


@cache
def greens_coefficients(n: int) -> FloatArray:
    """Return the normalized cosine coefficients of |sin(θ/2)|³ for k = 0..n/2.

    Computed by trapezoid quadrature on a grid 64 times finer than ``n``.
    """
    fine = grid(GREENS_OVERSAMPLE * n)
    kernel = np.abs(np.sin(fine / 2.0)) ** 3
    coeffs = np.fft.rfft(kernel).real[: n // 2 + 1] / fine.size
    coeffs.setflags(write=False)
    return coeffs


def greens_constant(n: int) -> float:
    """Return c in u = c·∫τu^(−5/3)(φ)|sin((θ−φ)/2)|³dφ, fixed by the constant mode."""
    p0 = 9.0 / 16.0
    return 1.0 / (TWO_PI * p0 * float(greens_coefficients(n)[0]))


def greens_convolution(f: PeriodicFunction) -> PeriodicFunction:
    """Return ∫ f(φ)|sin((θ−φ)/2)|³ dφ."""
    spec = f.spectrum * (TWO_PI * greens_coefficients(f.n))
    return PeriodicFunction(np.fft.irfft(spec * f.n, n=f.n))


def greens_residual(u: PeriodicFunction, tau: float | None = None) -> float:
    """Return the relative sup mismatch of the integral representation of u.

    ``tau`` is fitted by least squares when not given.

    Raises:
        PositivityViolation: If ``u`` is not positive.
    """
    check_positive(u, context="greens_residual")
    represented = greens_constant(u.n) * greens_convolution(power(u, -5.0 / 3.0))
    if tau is None:
        tau, residual = _fit_scalar(u.values, represented.values)
        _logger.debug("[Greens] fitted tau=%.12g residual=%.3e", tau, residual)
        return residual
    defect = float(np.max(np.abs(u.values - tau * represented.values)))
    return defect / max(1.0, u.sup_norm())


def _model(params: FloatArray, theta: FloatArray, family: Family) -> FloatArray:
    log_c, z1, z2 = params
    s = _FAMILIES[family]
    size = math.hypot(z1, z2)
    ratio = math.sinh(2.0 * size) / size if size > 1e-12 else 2.0
    angle = 2.0 * theta if s.full_angle else theta
    base = math.cosh(2.0 * size) + ratio * (z1 * np.cos(angle) + z2 * np.sin(angle))
    return math.exp(log_c) * np.maximum(base, 1e-300) ** s.exponent


def fit_family(u: PeriodicFunction, family: Family) -> tuple[ExtremalParams, float]:
    """Fit (c, λ, α) of ``family`` to ``u`` by nonlinear least squares.

    α is reported modulo the family's period; λ ≥ 1.

    Raises:
        PositivityViolation: If ``u`` is not positive.
        ConvergenceFailure: If the least-squares solve fails.
    """
    family = Family(family)
    check_positive(u, context=f"fit {family}")
    s = _FAMILIES[family]
    theta = u.theta
    values = u.values
    lam0 = max((u.max() / u.min()) ** (1.0 / (4.0 * s.exponent)), 1.0 + 1e-6)
    alpha0 = float(theta[int(np.argmax(values))])
    size0 = math.log(lam0)
    phase = 2.0 * alpha0 if s.full_angle else alpha0
    c0 = u.max() / lam0 ** (2.0 * s.exponent)
    x0 = np.array([math.log(c0), size0 * math.cos(phase), size0 * math.sin(phase)])

    result = least_squares(
        lambda x: _model(x, theta, family) - values,
        x0,
        xtol=1e-15,
        ftol=1e-15,
        gtol=1e-15,
        max_nfev=2000,
    )
    if result.status <= 0:
        raise ConvergenceFailure(f"fit_family({family}) failed: {result.message}")
    log_c, z1, z2 = result.x
    size = math.hypot(z1, z2)
    angle = math.atan2(z2, z1) if size > 0 else 0.0
    alpha = angle / 2.0 if s.full_angle else angle
    params = ExtremalParams(family, math.exp(log_c), math.exp(size), alpha)
    params = ExtremalParams(family, params.c, params.lam, params.alpha % params.period)
    error = float(np.max(np.abs(_model(result.x, theta, family) - values)))
    _logger.debug(
        "[Fit] %s c=%.10g lambda=%.10g alpha=%.10g error=%.3e",
        family,
        params.c,
        params.lam,
        params.alpha,
        error,
    )
    return params, error


def half_angle(v: PeriodicFunction) -> PeriodicFunction:
    """Return w(θ) = v(θ/2) for a π-periodic ``v``.

    Raises:
        ValueError: If ``v`` has odd harmonics (then w is not 2π-periodic).
    """
    odd = np.abs(v.spectrum[1::2])
    if float(np.max(odd, initial=0.0)) > 1e-10 * max(1.0, v.sup_norm()):
        raise ValueError("half_angle needs a pi-periodic function")
    return PeriodicFunction(v.at(v.theta / 2.0))


@dataclass(frozen=True)
class HalfAngleReport:
    """Residuals of w'' + w/4 = τ w^(−3) and of the printed w^(−2) variant."""

    tau_minus3: float
    residual_minus3: float
    tau_minus2: float
    residual_minus2: float

    @property
    def satisfied_exponent(self) -> int:
        """The exponent whose residual is smaller."""
        return -3 if self.residual_minus3 <= self.residual_minus2 else -2


def half_angle_bridge(v: PeriodicFunction) -> HalfAngleReport:
    """Transport ``v`` by the half angle and test both candidate equations.

    Raises:
        PositivityViolation: If ``v`` is not positive.
        ValueError: If ``v`` is not π-periodic.
    """
    check_positive(v, context="half_angle_bridge")
    w = half_angle(v)
    lhs = (differentiate(w, 2) + 0.25 * w).values
    tau3, res3 = _fit_scalar(lhs, power(w, -3.0).values)
    tau2, res2 = _fit_scalar(lhs, power(w, -2.0).values)
    return HalfAngleReport(tau3, res3, tau2, res2)
