"""Uniform-grid representation of smooth 2π-periodic functions.

A :class:`PeriodicFunction` stores N nodal values at θ_j = 2πj/N and exposes
its real FFT on demand. Differentiation, quadrature, resampling, composition
with circle maps and nonlinear powers are all spectral.

Conventions:
    * The half spectrum is ``numpy.fft.rfft(values) / N`` so that
      f(θ) = c_0 + 2 Re Σ_{0<k<N/2} c_k e^{ikθ} + c_{N/2} cos(Nθ/2).
    * Derivatives discard the Nyquist mode for every order, which keeps the
      discrete ∂_θ skew-adjoint and ∂_θ∘∂_θ equal to the second derivative.
    * Powers are evaluated on a 3/2-oversampled grid and truncated back.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from circleflow.errors import PositivityViolation

_logger: logging.Logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

MIN_GRID = 16
DEFAULT_GRID = 256
POSITIVITY_FLOOR = 1e-10
DEALIAS_FACTOR = 1.5
MONOTONE_SLACK = 1e-10
# Spectral tail below NOISE_FACTOR times its median is rounding noise; a tail
# median above PLATEAU_LEVEL·eps·max|f̂| still carries signal and is left alone.
NOISE_FACTOR = 3.0
PLATEAU_LEVEL = 1e3
TWO_PI = 2.0 * math.pi

# Off-grid evaluation builds an (points x modes) phase matrix; bound its size.
_EVAL_CHUNK = 512
_EPS = float(np.finfo(np.float64).eps)


def check_grid_size(n: int) -> int:
    """Return ``n`` if it is a valid grid size, else raise ``ValueError``."""
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"Grid size must be an integer, got {n!r}")
    n = int(n)
    if n < MIN_GRID or n % 2:
        raise ValueError(f"Grid size must be even and at least {MIN_GRID}, got {n}")
    return n


def grid(n: int) -> FloatArray:
    """Return the nodes θ_j = 2πj/n."""
    n = check_grid_size(n)
    return TWO_PI * np.arange(n, dtype=np.float64) / n


@dataclass(frozen=True, eq=False)
class PeriodicFunction:
    """Nodal samples of a smooth 2π-periodic real function.

    Instances are immutable: ``values`` is copied and marked read-only.
    """

    values: FloatArray

    # numpy scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.ndim != 1:
            raise ValueError("PeriodicFunction values must be one-dimensional")
        check_grid_size(values.size)
        if not np.all(np.isfinite(values)):
            raise ValueError("PeriodicFunction values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, func: Callable[[FloatArray], ArrayLike], n: int) -> PeriodicFunction:
        """Sample ``func`` on the n-point grid."""
        theta = grid(n)
        return cls(np.broadcast_to(np.asarray(func(theta), dtype=np.float64), theta.shape))

    @classmethod
    def constant(cls, value: float, n: int) -> PeriodicFunction:
        """Return the constant function ``value``."""
        return cls(np.full(check_grid_size(n), float(value)))

    @property
    def n(self) -> int:
        """Number of grid nodes."""
        return int(self.values.size)

    @property
    def theta(self) -> FloatArray:
        """Grid nodes."""
        return grid(self.n)

    @cached_property
    def spectrum(self) -> ComplexArray:
        """Normalized half spectrum ``rfft(values) / N`` (read-only)."""
        spec = np.fft.rfft(self.values) / self.n
        spec.setflags(write=False)
        return spec

    def min(self) -> float:
        """Smallest nodal value."""
        return float(self.values.min())

    def max(self) -> float:
        """Largest nodal value."""
        return float(self.values.max())

    def sup_norm(self) -> float:
        """Largest absolute nodal value."""
        return float(np.abs(self.values).max())

    def at(self, theta: ArrayLike) -> FloatArray:
        """Evaluate the trigonometric interpolant at arbitrary angles."""
        points = np.asarray(theta, dtype=np.float64)
        flat = points.ravel()
        spec = self.spectrum
        half = self.n // 2
        modes = np.arange(1, half, dtype=np.float64)
        interior = spec[1:half]
        out = np.empty_like(flat)
        for start in range(0, flat.size, _EVAL_CHUNK):
            chunk = flat[start : start + _EVAL_CHUNK]
            phase = np.exp(1j * np.outer(chunk, modes))
            nyquist = spec[half].real * np.cos(half * chunk)
            interior_sum = 2.0 * (phase @ interior).real
            out[start : start + _EVAL_CHUNK] = spec[0].real + interior_sum + nyquist
        return out.reshape(points.shape)

    def _coerce(self, other: PeriodicFunction | ArrayLike) -> FloatArray | float:
        if isinstance(other, PeriodicFunction):
            if other.n != self.n:
                raise ValueError(f"Grid mismatch: {self.n} vs {other.n}")
            return other.values
        array = np.asarray(other, dtype=np.float64)
        if array.ndim == 0:
            return float(array)
        if array.shape != self.values.shape:
            raise ValueError(f"Grid mismatch: {self.n} vs array of shape {array.shape}")
        return array

    def __add__(self, other: PeriodicFunction | ArrayLike) -> PeriodicFunction:
        return PeriodicFunction(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other: PeriodicFunction | ArrayLike) -> PeriodicFunction:
        return PeriodicFunction(self.values - self._coerce(other))

    def __rsub__(self, other: ArrayLike) -> PeriodicFunction:
        return PeriodicFunction(self._coerce(other) - self.values)

    def __mul__(self, other: PeriodicFunction | ArrayLike) -> PeriodicFunction:
        return PeriodicFunction(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other: PeriodicFunction | ArrayLike) -> PeriodicFunction:
        return PeriodicFunction(self.values / self._coerce(other))

    def __neg__(self) -> PeriodicFunction:
        return PeriodicFunction(-self.values)


@dataclass(frozen=True)
class FourierCoeffs:
    """Real Fourier coefficients f = c0 + Σ a_k cos kθ + b_k sin kθ (+ Nyquist cosine).

    ``a[k-1]`` and ``b[k-1]`` hold harmonic k for k = 1..N/2 − 1.
    """

    c0: float
    a: FloatArray
    b: FloatArray
    nyquist: float = 0.0

    @property
    def n(self) -> int:
        """Grid size these coefficients were taken from."""
        return 2 * (self.a.size + 1)

    def harmonic(self, k: int) -> tuple[float, float]:
        """Return (a_k, b_k); the constant mode is reported as (c0, 0)."""
        if k == 0:
            return self.c0, 0.0
        if k == self.n // 2:
            return self.nyquist, 0.0
        return float(self.a[k - 1]), float(self.b[k - 1])

    def energy(self) -> float:
        """Coefficient energy Σ (a_k² + b_k²) + 2 nyquist², without the c0 term."""
        return float(np.sum(self.a**2) + np.sum(self.b**2) + 2.0 * self.nyquist**2)


def fourier_coeffs(f: PeriodicFunction) -> FourierCoeffs:
    """Return the real cosine/sine coefficients of ``f``."""
    spec = f.spectrum
    half = f.n // 2
    interior = spec[1:half]
    return FourierCoeffs(
        c0=float(spec[0].real),
        a=2.0 * interior.real,
        b=-2.0 * interior.imag,
        nyquist=float(spec[half].real),
    )


def from_coeffs(coeffs: FourierCoeffs, n: int | None = None) -> PeriodicFunction:
    """Synthesize nodal values from real coefficients, resampling to ``n`` if given."""
    size = coeffs.n
    spec = np.zeros(size // 2 + 1, dtype=np.complex128)
    spec[0] = coeffs.c0
    spec[1 : size // 2] = 0.5 * (coeffs.a - 1j * coeffs.b)
    spec[size // 2] = coeffs.nyquist
    values = np.fft.irfft(spec * size, n=size)
    f = PeriodicFunction(values)
    return f if n is None or n == size else resample(f, n)


def parseval_defect(f: PeriodicFunction) -> float:
    """Relative mismatch between coefficient energy and (1/π)∫f² − 2c0²."""
    coeffs = fourier_coeffs(f)
    lhs = coeffs.energy()
    rhs = integrate(f * f) / math.pi - 2.0 * coeffs.c0**2
    scale = max(abs(rhs), integrate(f * f) / math.pi, 1e-300)
    return abs(lhs - rhs) / scale


def _resize_spectrum(spec: ComplexArray, n_from: int, n_to: int) -> ComplexArray:
    """Pad or truncate a normalized half spectrum, splitting/merging Nyquist terms."""
    out = np.zeros(n_to // 2 + 1, dtype=np.complex128)
    half_from = n_from // 2
    if n_to == n_from:
        out[:] = spec
    elif n_to > n_from:
        out[:half_from] = spec[:half_from]
        # the source cosine at N/2 becomes an interior mode on the finer grid
        out[half_from] = 0.5 * spec[half_from].real
    else:
        half_to = n_to // 2
        out[:half_to] = spec[:half_to]
        if n_to % 2 == 0:
            out[half_to] = 2.0 * spec[half_to].real
        else:
            out[half_to] = spec[half_to]
    return out


def _values_on(spec: ComplexArray, n: int) -> FloatArray:
    return np.fft.irfft(spec * n, n=n)


def resample(f: PeriodicFunction, n: int) -> PeriodicFunction:
    """Return the trigonometric interpolant of ``f`` sampled on an n-point grid."""
    n = check_grid_size(n)
    if n == f.n:
        return f
    return PeriodicFunction(_values_on(_resize_spectrum(f.spectrum, f.n, n), n))


def filter_roundoff(spec: ComplexArray) -> ComplexArray:
    """Zero the modes that sit on the rounding plateau of a resolved spectrum.

    The plateau level is the median magnitude of the top quarter of modes. A
    spectrum whose tail is still well above rounding is returned unchanged.
    """
    mags = np.abs(spec)
    top = float(mags.max(initial=0.0))
    if top == 0.0:
        return spec
    floor = float(np.median(mags[3 * (mags.size - 1) // 4 :]))
    if floor > PLATEAU_LEVEL * _EPS * top:
        return spec
    return np.where(mags > NOISE_FACTOR * floor, spec, 0.0)


def differentiate(f: PeriodicFunction, order: int = 1) -> PeriodicFunction:
    """Return the spectral derivative of the given order (1 to 4).

    Modes on the rounding plateau are dropped first; an order-k derivative
    multiplies them by k^order and would otherwise swamp the result.

    Raises:
        ValueError: If ``order`` is outside 1..4.
    """
    if isinstance(order, bool) or order not in {1, 2, 3, 4}:
        raise ValueError(f"Derivative order must be 1, 2, 3 or 4, got {order!r}")
    half = f.n // 2
    k = np.arange(half + 1, dtype=np.float64)
    spec = filter_roundoff(f.spectrum) * (1j * k) ** order
    spec[half] = 0.0
    return PeriodicFunction(_values_on(spec, f.n))


def fourier_multiply(
    f: PeriodicFunction, symbol: Callable[[FloatArray], ArrayLike]
) -> PeriodicFunction:
    """Apply the real Fourier multiplier ``symbol(k)``, k = 0..N/2, to ``f``."""
    k = np.arange(f.n // 2 + 1, dtype=np.float64)
    weights = np.broadcast_to(np.asarray(symbol(k), dtype=np.float64), k.shape)
    return PeriodicFunction(_values_on(f.spectrum * weights, f.n))


def integrate(f: PeriodicFunction) -> float:
    """Trapezoid quadrature (2π/N)·Σ f(θ_j) over one period."""
    return TWO_PI * float(np.sum(f.values)) / f.n


def mean(f: PeriodicFunction) -> float:
    """Average value over the period."""
    return float(np.mean(f.values))


def check_positive(f: PeriodicFunction, context: str = "", floor: float = POSITIVITY_FLOOR) -> None:
    """Raise :class:`PositivityViolation` unless min(f) > floor."""
    minimum = f.min()
    if not minimum > floor:
        raise PositivityViolation(minimum, floor, context)


def power(f: PeriodicFunction, p: float) -> PeriodicFunction:
    """Return f^p evaluated on a 3/2-oversampled grid and truncated back to N.

    Raises:
        PositivityViolation: If ``p`` is negative or fractional and min(f) is
            not above the positivity floor.
    """
    p = float(p)
    needs_positive = p < 0 or not p.is_integer()
    if needs_positive:
        check_positive(f, context=f"power({p:g})")
    if p == 0.0:
        return PeriodicFunction.constant(1.0, f.n)
    if p == 1.0:
        return f
    fine_n = int(round(f.n * DEALIAS_FACTOR))
    fine = _values_on(_resize_spectrum(f.spectrum, f.n, fine_n), fine_n)
    if needs_positive and not fine.min() > 0.0:
        raise PositivityViolation(float(fine.min()), 0.0, f"oversampled power({p:g})")
    fine_spec = np.fft.rfft(fine**p) / fine_n
    return PeriodicFunction(_values_on(_resize_spectrum(fine_spec, fine_n, f.n), f.n))


def compose(f: PeriodicFunction, reparam: Callable[[FloatArray], ArrayLike]) -> PeriodicFunction:
    """Return θ ↦ f(ω(θ)) for a degree-one increasing circle map ω.

    ``reparam`` is evaluated on the grid; its samples, closed up by
    ω(θ_0) + 2π, must be non-decreasing within ``MONOTONE_SLACK``.

    Raises:
        ValueError: If the sampled map is not monotone.
    """
    theta = f.theta
    omega = np.asarray(reparam(theta), dtype=np.float64)
    if omega.shape != theta.shape:
        raise ValueError("Reparametrization must return one value per node")
    steps = np.diff(np.append(omega, omega[0] + TWO_PI))
    if steps.min() < -MONOTONE_SLACK:
        raise ValueError(f"Reparametrization is not monotone (step {steps.min():.3e})")
    return PeriodicFunction(f.at(omega))


def from_trig_coefficients(coeffs: Sequence[float], n: int) -> PeriodicFunction:
    """Sample c0 + Σ_k (a_k cos kθ + b_k sin kθ) from the flat list [c0, a1, b1, a2, b2, ...]."""
    if not coeffs:
        raise ValueError("At least the constant coefficient is required")
    theta = grid(n)
    values = np.full(theta.shape, float(coeffs[0]))
    pairs = list(coeffs[1:])
    if len(pairs) % 2:
        pairs.append(0.0)
    for index in range(0, len(pairs), 2):
        k = index // 2 + 1
        a_k, b_k = float(pairs[index]), float(pairs[index + 1])
        values += a_k * np.cos(k * theta) + b_k * np.sin(k * theta)
    return PeriodicFunction(values)


def random_positive(
    rng: np.random.Generator,
    n: int = DEFAULT_GRID,
    degree: int = 6,
    amplitude: float = 0.3,
) -> PeriodicFunction:
    """Return exp(p) for a random trigonometric polynomial p of the given degree.

    Every coefficient of p is drawn uniformly from [−amplitude, amplitude].
    """
    coeffs = rng.uniform(-amplitude, amplitude, size=2 * degree + 1)
    p = from_trig_coefficients(coeffs.tolist(), n)
    return PeriodicFunction(np.exp(p.values))
