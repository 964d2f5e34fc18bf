"""Tests for the identity suites."""

import numpy as np
import pytest

from circleflow.config import RunConfig
from circleflow.geometry import ConformalMetric, Convention, PVariant
from circleflow.spectral_core import PeriodicFunction, random_positive
from circleflow.verify import (
    COVARIANCE_TOL,
    SUITE_NAMES,
    CovarianceCase,
    OperatorKind,
    cocycle_residual,
    covariance_residual,
    divergence_term,
    q_alpha_identity_residual,
    random_case,
    random_test_function,
    relative_residual,
    roundoff_floor,
    run_suite,
    shift_linearity_check,
    spectral_decay,
    total_Q_identity,
)


def test_relative_residual_scales_by_rhs() -> None:
    """Divide by the larger of one and sup|rhs|."""
    lhs = PeriodicFunction.constant(101.0, 16)
    rhs = PeriodicFunction.constant(100.0, 16)
    assert relative_residual(lhs, rhs) == pytest.approx(0.01)
    small = PeriodicFunction.constant(0.5, 16)
    assert relative_residual(small, small * 0.0) == pytest.approx(0.5)


def test_case_rejects_wrong_convention(rng: np.random.Generator) -> None:
    """Refuse an L case on a POW43 base."""
    base = ConformalMetric(random_positive(rng, 32), Convention.POW43)
    f = random_positive(rng, 32)
    with pytest.raises(ValueError, match="needs a pow4 base metric"):
        CovarianceCase(base, f, f, OperatorKind.L)


@pytest.mark.parametrize("n", [128, 256, 512])
@pytest.mark.parametrize("operator", list(OperatorKind))
def test_covariance_holds(operator: OperatorKind, n: int, rng: np.random.Generator) -> None:
    """Transform curvature and operator with the conformal weight on every grid."""
    case = random_case(rng, operator, n)
    curv, op = covariance_residual(case)
    assert curv < COVARIANCE_TOL
    assert op < COVARIANCE_TOL


@pytest.mark.parametrize("operator", [OperatorKind.L, OperatorKind.P_ALPHA])
def test_covariance_detects_wrong_alpha(operator: OperatorKind, rng: np.random.Generator) -> None:
    """Fail once the g₂ side uses a perturbed α."""
    case = random_case(rng, operator, 128, alpha=2.0)
    curv, op = covariance_residual(case, lhs_alpha=2.02)
    assert max(curv, op) > 1e-4


@pytest.mark.parametrize("n", [128, 256, 512])
@pytest.mark.parametrize("operator", list(OperatorKind))
def test_cocycle(operator: OperatorKind, n: int, rng: np.random.Generator) -> None:
    """Reach the same operator in one or two conformal changes."""
    case = random_case(rng, operator, n)
    psi = random_positive(rng, n)
    assert cocycle_residual(case.base, case.phi, psi, operator, case.alpha, case.psi) < 1e-7


def test_random_test_function_is_signed_polynomial(rng: np.random.Generator) -> None:
    """Draw a low-degree trigonometric polynomial."""
    f = random_test_function(rng, 64, degree=3)
    spectrum = np.abs(f.spectrum)
    assert np.all(spectrum[4:] < 1e-14)


@pytest.mark.parametrize("variant", list(PVariant))
def test_shift_linearity(variant: PVariant, rng: np.random.Generator) -> None:
    """Split P(C + ψ) into C·P(1) + P(ψ)."""
    psi = random_test_function(rng, 64)
    assert shift_linearity_check(psi, 2.0 - psi.min(), variant=variant) < 1e-10


def test_shift_linearity_needs_positive_sum() -> None:
    """Refuse C + ψ that is not positive."""
    psi = PeriodicFunction.from_callable(np.cos, 32)
    with pytest.raises(ValueError, match="must be positive"):
        shift_linearity_check(psi, 0.5)


@pytest.mark.parametrize("alpha", [1.0, 4.0, 2.7])
def test_q_alpha_identity(alpha: float, rng: np.random.Generator) -> None:
    """Write Q^α through R^α and its Laplacian."""
    g = ConformalMetric(random_positive(rng, 128), Convention.POW43)
    assert q_alpha_identity_residual(g, alpha) < 1e-7


def test_q_alpha_identity_detects_shifted_alpha(rng: np.random.Generator) -> None:
    """Fail when the right side uses another α."""
    g = ConformalMetric(random_positive(rng, 128), Convention.POW43)
    assert q_alpha_identity_residual(g, 2.0, rhs_alpha=2.01) > 1e-5


def test_total_q_and_divergence(rng: np.random.Generator) -> None:
    """Integrate Q^α to ∫(R^α)² and the Laplacian term to zero."""
    g = ConformalMetric(random_positive(rng, 128), Convention.POW43)
    lhs, rhs = total_Q_identity(g, 3.0)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    assert abs(divergence_term(g, 3.0)) < 1e-9 * max(1.0, abs(rhs))


def test_roundoff_floor() -> None:
    """Scale as ten machine epsilons times (n/2)^order."""
    assert roundoff_floor(512, 4) == pytest.approx(10 * np.finfo(float).eps * 256.0**4)


@pytest.mark.parametrize("operator", list(OperatorKind))
def test_spectral_decay_stalls_at_roundoff(operator: OperatorKind) -> None:
    """Keep the fine-grid residual at most the coarse one or the round-off floor."""
    coarse, fine = spectral_decay(operator, seed=5)
    assert fine <= max(coarse, roundoff_floor(512, 4))


def test_run_suite_rejects_unknown_name(small_config: RunConfig) -> None:
    """Name the known suites in the error."""
    with pytest.raises(ValueError, match="Unknown suite 'bogus'"):
        run_suite("bogus", small_config)


def test_suite_names() -> None:
    """Expose the three suites in a stable order."""
    assert SUITE_NAMES == ("covariance", "identities", "inequalities")


@pytest.mark.parametrize("name", ["identities", "inequalities"])
def test_suite_passes(name: str, small_config: RunConfig) -> None:
    """Pass every check on a healthy build."""
    report = run_suite(name, small_config)
    failed = [check.name for check in report.checks if not check.passed]
    assert report.passed, failed
    assert report.name == name


def test_inequalities_suite_notes(small_config: RunConfig) -> None:
    """Record ensemble minima and the conjecture gap."""
    notes = run_suite("inequalities", small_config).notes
    assert notes["ensemble_size"] == small_config.ensemble_size
    assert notes["J_BS.min_value"] == pytest.approx(-4 * np.pi**2, rel=1e-9)
    assert "F_SYMQ.conjecture_gap" in notes


@pytest.mark.parametrize("name", ["identities", "inequalities"])
def test_corrupted_suite_fails(name: str, small_config: RunConfig) -> None:
    """Fail the negative control."""
    assert not run_suite(name, small_config, corrupt=True).passed


def test_failed_check_is_logged(small_config: RunConfig, caplog: pytest.LogCaptureFixture) -> None:
    """Warn with the check name when a tolerance is exceeded."""
    with caplog.at_level("WARNING", logger="circleflow.verify"):
        run_suite("identities", small_config, corrupt=True)
    assert any("[Verify]" in record.getMessage() for record in caplog.records)
    assert any("exceeds" in record.getMessage() for record in caplog.records)
