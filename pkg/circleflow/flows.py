"""Normalized conformal curvature flows integrated in the conformal factor.

Metric-level flows and their factor form:

=========  ===========================  =================================
kind       ∂_t g                        ∂_t w
=========  ===========================  =================================
AFFINE     (κ̄ − κ) g,  g = w^(−4)g_s    (1/4)(κ − κ̄) w
YAMABE     (k̄ − k) g,  g = w^(−4)g_s    (1/4)(k − k̄) w
SYM_Q      (Q^A − Q̄^A) g, w^(−4/3)g_s   −(3/4)(Q^A − Q̄^A) w
Q_FLOW     (Q − Q̄) g,  g = w^(−4/3)g_s  −(3/4)(Q − Q̄) w
=========  ===========================  =================================

Each step is IMEX: the leading derivative, with its coefficient frozen at
its maximum over the circle, is treated implicitly in Fourier space and the
remaining right-hand side explicitly. The subtracted mean is replaced by the
constant that keeps the discrete length of the step fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import StrEnum
import logging
import math

import numpy as np
from scipy.optimize import newton

from circleflow.errors import BlowupSuspected, PositivityViolation, StepRejected
from circleflow.geometry import (
    ConformalMetric,
    Convention,
    CurvatureReport,
    alpha_scalar_curvature,
    general_Q_curvature,
)
from circleflow.spectral_core import (
    POSITIVITY_FLOOR,
    PeriodicFunction,
    fourier_multiply,
    integrate,
    power,
)

_logger: logging.Logger = logging.getLogger(__name__)

DT_GROWTH = 1.25
NORMALIZER_MAXITER = 20
PI = math.pi


class FlowKind(StrEnum):
    """The four normalized flows."""

    AFFINE = "AFFINE"
    YAMABE = "YAMABE"
    SYM_Q = "SYM_Q"
    Q_FLOW = "Q_FLOW"


@dataclass(frozen=True)
class _FlowShape:
    convention: Convention
    alpha: float
    # ∂_t w = speed · (curvature − mean) · w
    speed: float
    # leading coefficient lead · w^lead_power of the ∂^(2·order) term
    lead: float
    lead_power: float
    order: int
    quantity: str
    increasing: bool


_SHAPES: dict[FlowKind, _FlowShape] = {
    FlowKind.AFFINE: _FlowShape(
        Convention.POW4, 1.0, 0.25, 0.25, 4.0, 1, "mean_affine_curvature", True
    ),
    FlowKind.YAMABE: _FlowShape(
        Convention.POW4, 4.0, 0.25, 1.0, 4.0, 1, "mean_four_scalar_curvature", True
    ),
    FlowKind.SYM_Q: _FlowShape(
        Convention.POW43, 1.0, -0.75, 1.0 / 12.0, 8.0 / 3.0, 2, "mean_symmetric_Q", False
    ),
    FlowKind.Q_FLOW: _FlowShape(
        Convention.POW43, 4.0, -0.75, 4.0 / 3.0, 8.0 / 3.0, 2, "total_Q", False
    ),
}


def convention_of(kind: FlowKind) -> Convention:
    """Return the conformal-factor convention a flow runs in."""
    return _SHAPES[FlowKind(kind)].convention


def curvature(kind: FlowKind, g: ConformalMetric) -> CurvatureReport:
    """Return the curvature that drives ``kind`` on ``g``."""
    s = _SHAPES[FlowKind(kind)]
    if s.convention is Convention.POW4:
        return alpha_scalar_curvature(g, s.alpha)
    return general_Q_curvature(g, s.alpha)


def velocity(kind: FlowKind, w: PeriodicFunction) -> PeriodicFunction:
    """Return ∂_t w for the flow ``kind`` at factor ``w``."""
    s = _SHAPES[FlowKind(kind)]
    rep = curvature(kind, ConformalMetric(w, s.convention))
    return s.speed * (rep.field - rep.mean) * w


def metric_velocity(kind: FlowKind, w: PeriodicFunction) -> PeriodicFunction:
    """Return ∂_t g / g_s straight from the metric-level flow equation."""
    s = _SHAPES[FlowKind(kind)]
    g = ConformalMetric(w, s.convention)
    rep = curvature(kind, g)
    if s.convention is Convention.POW4:
        return (rep.mean - rep.field) * power(w, -4.0)
    return (rep.field - rep.mean) * power(w, -4.0 / 3.0)


def functional_value(kind: FlowKind, rep: CurvatureReport) -> float:
    """Return the sharp functional of the flow's factor, read off its curvature.

    AFFINE gives J = −κ̄L², YAMABE gives Y = −k̄L²/4, SYM_Q gives
    F_SYMQ = 9Q̄^A L⁴ and Q_FLOW gives F_Q = (9/16)Q̄ L⁴.
    """
    kind = FlowKind(kind)
    if kind is FlowKind.AFFINE:
        return -rep.mean * rep.length**2
    if kind is FlowKind.YAMABE:
        return -rep.mean * rep.length**2 / 4.0
    if kind is FlowKind.SYM_Q:
        return 9.0 * rep.mean * rep.length**4
    return 9.0 / 16.0 * rep.mean * rep.length**4


def monotone_quantity(kind: FlowKind, sample: FlowSample) -> float:
    """Return the quantity whose monotonicity the flow guarantees."""
    if FlowKind(kind) is FlowKind.Q_FLOW:
        return sample.mean * sample.length
    return sample.mean


@dataclass(frozen=True)
class FlowSample:
    """One diagnostic record."""

    t: float
    mean: float
    length: float
    functional: float


@dataclass(frozen=True)
class FlowOptions:
    """Step control for :func:`evolve`."""

    dt0: float = 1e-3
    dt_max: float = 1e-2
    dt_min: float = 1e-12
    stationarity_tol: float = 1e-8
    max_steps: int = 1_000_000
    max_relative_change: float = 0.1
    conserve_length: bool = False


@dataclass(frozen=True)
class FlowState:
    """Time, current metric and the diagnostics recorded so far."""

    kind: FlowKind
    t: float
    metric: ConformalMetric
    history: tuple[FlowSample, ...] = ()
    initial_length: float | None = None
    stationary: bool = False
    steps: int = 0

    @classmethod
    def start(cls, kind: FlowKind, w0: PeriodicFunction) -> FlowState:
        """Build the initial state with its first diagnostic sample."""
        kind = FlowKind(kind)
        g = ConformalMetric(w0, convention_of(kind))
        sample = _sample(kind, 0.0, curvature(kind, g))
        return cls(kind=kind, t=0.0, metric=g, history=(sample,), initial_length=sample.length)


def _sample(kind: FlowKind, t: float, rep: CurvatureReport) -> FlowSample:
    return FlowSample(t=t, mean=rep.mean, length=rep.length, functional=functional_value(kind, rep))


def _normalizer(
    convention: Convention,
    w: PeriodicFunction,
    drive: PeriodicFunction,
    base: PeriodicFunction,
    guess: float,
) -> float:
    """Return μ so that ``w + drive − μ·base`` has the length of ``w``.

    μ is the discrete counterpart of the metric mean: as dt → 0 the root
    tends to it, since the mean is the multiplier that makes dL/dt vanish.

    Raises:
        StepRejected: If Newton on μ does not converge.
    """
    exponent = -2.0 if convention is Convention.POW4 else -2.0 / 3.0
    target = ConformalMetric(w, convention).length()

    def mismatch(mu: float) -> float:
        return ConformalMetric(w + drive - mu * base, convention).length() - target

    def slope(mu: float) -> float:
        new = w + drive - mu * base
        return -exponent * integrate(power(new, exponent - 1.0) * base)

    try:
        root = newton(
            mismatch, guess, fprime=slope, tol=1e-15, rtol=1e-13, maxiter=NORMALIZER_MAXITER
        )
    except (RuntimeError, RuntimeWarning, PositivityViolation) as err:
        raise StepRejected(f"length normalization failed: {err}") from err
    return float(root)


def _advance(
    kind: FlowKind,
    w: PeriodicFunction,
    dt: float,
    target_length: float | None,
    max_relative_change: float = 0.1,
) -> PeriodicFunction:
    """Take one IMEX step from ``w``.

    The normalizing constant is solved for so the step keeps the length of
    the metric. With ``target_length`` the factor is also rescaled onto it.

    Raises:
        StepRejected: If positivity is lost or the factor changes too much.
    """
    s = _SHAPES[kind]
    rep = curvature(kind, ConformalMetric(w, s.convention))
    stiffness = s.lead * float(np.max(w.values)) ** s.lead_power
    order = 2 * s.order

    def damped(f: PeriodicFunction) -> PeriodicFunction:
        return fourier_multiply(f, lambda k: dt / (1.0 + dt * stiffness * k**order))

    drive = damped(s.speed * rep.field * w)
    base = damped(s.speed * w)
    mu = _normalizer(s.convention, w, drive, base, rep.mean)
    increment = drive - mu * base
    new = w + increment
    if not new.min() > POSITIVITY_FLOOR:
        raise StepRejected(f"{kind} step lost positivity (min {new.min():.3e})")
    change = increment.sup_norm() / w.sup_norm()
    if change > max_relative_change:
        raise StepRejected(f"{kind} step changed the factor by {change:.3e}")
    if target_length is not None:
        length = ConformalMetric(new, s.convention).length()
        exponent = 0.5 if s.convention is Convention.POW4 else 1.5
        new = new * (length / target_length) ** exponent
    return new


def step(kind: FlowKind, s: FlowState, dt: float, opts: FlowOptions | None = None) -> FlowState:
    """Advance ``s`` by one IMEX step of size ``dt``.

    Raises:
        ValueError: If ``dt`` is not positive or ``s`` belongs to another flow.
        StepRejected: If positivity or the relative-change bound is violated.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    kind = FlowKind(kind)
    if kind is not s.kind:
        raise ValueError(f"State was started for {s.kind}, not {kind}")
    opts = opts or FlowOptions()
    target = s.initial_length if opts.conserve_length else None
    try:
        w = _advance(kind, s.metric.factor, dt, target, opts.max_relative_change)
        g = ConformalMetric(w, s.metric.convention)
    except PositivityViolation as err:
        raise StepRejected(str(err)) from err
    t = s.t + dt
    sample = _sample(kind, t, curvature(kind, g))
    return FlowState(
        kind=kind,
        t=t,
        metric=g,
        history=(*s.history, sample),
        initial_length=s.initial_length,
        steps=s.steps + 1,
    )


def evolve(
    kind: FlowKind,
    w0: PeriodicFunction,
    t_end: float,
    opts: FlowOptions | None = None,
) -> FlowState:
    """Integrate ``kind`` from ``w0`` until ``t_end`` or stationarity.

    dt halves on every rejected step and grows by 1.25 (up to ``dt_max``)
    after an accepted one.

    Raises:
        BlowupSuspected: If dt falls below ``dt_min``.
    """
    kind = FlowKind(kind)
    opts = opts or FlowOptions()
    state = FlowState.start(kind, w0)
    convention = state.metric.convention
    target = state.initial_length if opts.conserve_length else None
    w = w0
    t = 0.0
    dt = opts.dt0
    history = list(state.history)
    steps = 0
    stationary = False
    while steps < opts.max_steps:
        rep = curvature(kind, ConformalMetric(w, convention))
        if float(np.max(np.abs(rep.field.values - rep.mean))) < opts.stationarity_tol:
            stationary = True
            break
        if t >= t_end:
            break
        trial_dt = min(dt, t_end - t)
        try:
            w = _advance(kind, w, trial_dt, target, opts.max_relative_change)
        except (StepRejected, PositivityViolation) as err:
            dt = trial_dt / 2.0
            _logger.warning("[Flow] %s rejected step at t=%.6g, dt -> %.3e: %s", kind, t, dt, err)
            if dt < opts.dt_min:
                raise BlowupSuspected(f"{kind} dt underflow at t={t:.6g}") from err
            continue
        t += trial_dt
        steps += 1
        history.append(_sample(kind, t, curvature(kind, ConformalMetric(w, convention))))
        if trial_dt >= dt:
            dt = min(dt * DT_GROWTH, opts.dt_max)
    _logger.info(
        "[Flow] %s stopped at t=%.6g after %d steps (stationary=%s)", kind, t, steps, stationary
    )
    return FlowState(
        kind=kind,
        t=t,
        metric=ConformalMetric(w, convention),
        history=tuple(history),
        initial_length=state.initial_length,
        stationary=stationary,
        steps=steps,
    )


@dataclass(frozen=True)
class MonotonicityReport:
    """Verdict on the monotone quantity of a flow run.

    ``worst_violation`` is the largest rate (per unit time) at which the
    quantity moved against its expected direction.
    """

    kind: FlowKind
    quantity: str
    direction: str
    monotone: bool
    worst_violation: float
    length_drift: float
    bound: float
    bounded: bool
    values: list[float] = field(default_factory=list)


MONOTONE_RATE_TOL = 1e-7


def _bound(kind: FlowKind, length: float) -> float:
    """Sharp bound on the monotone quantity implied by the inequalities."""
    if kind in {FlowKind.AFFINE, FlowKind.YAMABE}:
        return 4.0 * PI**2 / length**2
    if kind is FlowKind.Q_FLOW:
        return 16.0 * PI**4 / length**3
    return 0.0


def monotonicity_report(s: FlowState) -> MonotonicityReport:
    """Check the recorded history for the flow's monotone quantity.

    AFFINE and YAMABE means must not decrease and stay below 4π²/L²;
    SYM_Q's mean must not increase and stays positive; Q_FLOW's ∫Q dS must
    not increase and stays above 16π⁴/L³.

    Raises:
        ValueError: If the history is empty.
    """
    kind = s.kind
    if not s.history:
        raise ValueError("monotonicity_report needs a non-empty history")
    shape = _SHAPES[kind]
    values = [monotone_quantity(kind, sample) for sample in s.history]
    times = [sample.t for sample in s.history]
    sign = 1.0 if shape.increasing else -1.0
    worst = 0.0
    for i in range(len(values) - 1):
        dt = times[i + 1] - times[i]
        if dt <= 0:
            continue
        against = sign * (values[i] - values[i + 1])
        worst = max(worst, against / dt)
    lengths = np.array([sample.length for sample in s.history])
    drift = float(np.max(np.abs(lengths - lengths[0])) / lengths[0])
    bound = _bound(kind, float(lengths[0]))
    slack = 1e-9 * max(1.0, abs(bound))
    if kind is FlowKind.SYM_Q:
        bounded = min(values) > 0
    elif shape.increasing:
        bounded = max(values) <= bound + slack
    else:
        bounded = min(values) >= bound - slack
    report = MonotonicityReport(
        kind=kind,
        quantity=shape.quantity,
        direction="non-decreasing" if shape.increasing else "non-increasing",
        monotone=worst < MONOTONE_RATE_TOL,
        worst_violation=worst,
        length_drift=drift,
        bound=bound,
        bounded=bounded,
        values=values,
    )
    _logger.info(
        "[Flow] %s %s %s: monotone=%s worst=%.3e bounded=%s",
        kind,
        report.quantity,
        report.direction,
        report.monotone,
        worst,
        bounded,
    )
    return report
