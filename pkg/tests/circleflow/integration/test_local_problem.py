"""The interval problem solved in closed form and by direct minimization."""

import numpy as np
import pytest

from circleflow.optimize import LocalProblem, local_oracle, solve_local


@pytest.mark.integration
def test_closed_form_matches_oracle_on_random_problems() -> None:
    """Agree with the discretized minimum on fifty seeded problems of both branches."""
    rng = np.random.default_rng(2024)
    for _ in range(50):
        r = float(rng.uniform(0.5, 2.0))
        b = float(rng.uniform(0.7, 1.5))
        a = 2.0 * r / b**2 * float(rng.choice([rng.uniform(0.5, 0.95), rng.uniform(1.05, 2.0)]))
        problem = LocalProblem(a=a, b=b, r=r)
        expected = solve_local(problem).infimum
        assert local_oracle(problem) == pytest.approx(expected, rel=5e-3, abs=2e-3), problem
