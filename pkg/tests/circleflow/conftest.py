"""Shared pytest configuration for circleflow tests."""

from pathlib import Path
import sys

import numpy as np
import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[2]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from circleflow import config  # noqa: E402
from circleflow.config import RunConfig  # noqa: E402

SEED = 20240611


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a generator with a fixed seed so every test draw is reproducible."""
    return np.random.default_rng(SEED)


@pytest.fixture
def results_dir(tmp_path: Path) -> Path:
    """Return an isolated output directory."""
    return tmp_path / "results"


@pytest.fixture
def isolated_config(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Redirect the default configuration file into a temporary directory."""
    path = tmp_path / "circleflow.yaml"
    monkeypatch.setattr(config, "CONFIG_PATH", path)
    return path


@pytest.fixture
def small_config(results_dir: Path) -> RunConfig:
    """Return a configuration sized for quick runs."""
    return RunConfig(n=128, seed=3, ensemble_size=8, output_dir=results_dir)
