"""Tests for run configuration layering and validation."""

from pathlib import Path

import pytest

from circleflow.config import RunConfig, get_default_config, load_config, save_config
from circleflow.errors import InvalidInputError
from circleflow.yaml_store import YamlStoreError, load_yaml_file


def test_missing_file_returns_defaults(isolated_config: Path) -> None:
    """Fall back to defaults when no configuration file exists."""
    loaded = load_config()
    assert loaded == RunConfig()
    assert loaded.n == 256
    assert loaded.gradient_tol == 1e-7


def test_file_values_override_defaults(isolated_config: Path) -> None:
    """Take values from the YAML file and keep defaults for the rest."""
    isolated_config.write_text("n: 512\nseed: 9\n", encoding="utf-8")
    loaded = load_config()
    assert (loaded.n, loaded.seed, loaded.t_end) == (512, 9, 10.0)


def test_overrides_win_and_none_is_ignored(isolated_config: Path) -> None:
    """Apply command-line overrides last and skip unset ones."""
    isolated_config.write_text("n: 512\nseed: 9\n", encoding="utf-8")
    loaded = load_config(overrides={"n": 64, "seed": None})
    assert (loaded.n, loaded.seed) == (64, 9)


def test_explicit_path_beats_config_path(tmp_path: Path, isolated_config: Path) -> None:
    """Read an explicitly named file instead of CONFIG_PATH."""
    isolated_config.write_text("seed: 1\n", encoding="utf-8")
    other = tmp_path / "other.yaml"
    other.write_text("seed: 2\n", encoding="utf-8")
    assert load_config(other).seed == 2


@pytest.mark.parametrize(
    "contents",
    ["n: 100\n", "n: 8\n", "gradient_tol: -1\n", "unknown_key: 1\n", "ensemble_size: 0\n"],
)
def test_invalid_values_raise(isolated_config: Path, contents: str) -> None:
    """Reject out-of-range, non power-of-two and unknown settings."""
    isolated_config.write_text(contents, encoding="utf-8")
    with pytest.raises(InvalidInputError, match="Invalid configuration"):
        load_config()


@pytest.mark.parametrize("contents", ["broken: [", "- wrong\n- shape\n"])
def test_malformed_yaml_raises_store_error(isolated_config: Path, contents: str) -> None:
    """Expose corrupt and wrong-shaped YAML as store errors."""
    isolated_config.write_text(contents, encoding="utf-8")
    with pytest.raises(YamlStoreError):
        load_config()


def test_invalid_input_error_exit_code() -> None:
    """Report bad configuration with the bad-input exit code."""
    assert InvalidInputError.exit_code == 2


def test_config_is_frozen() -> None:
    """Refuse mutation after validation."""
    cfg = RunConfig()
    with pytest.raises(ValueError, match="frozen"):
        cfg.n = 64  # type: ignore[misc]


def test_save_round_trips(tmp_path: Path) -> None:
    """Write the effective configuration and load it back unchanged."""
    cfg = RunConfig(n=128, seed=4, output_dir=tmp_path / "out")
    path = tmp_path / "saved.yaml"
    save_config(cfg, path)
    assert load_yaml_file(path, {}, expected_type=dict)["n"] == 128
    assert load_config(path) == cfg


def test_defaults_are_json_friendly() -> None:
    """Expose defaults as plain values suitable for YAML."""
    defaults = get_default_config()
    assert defaults["output_dir"] == "results"
    assert set(defaults) == set(RunConfig.model_fields)
