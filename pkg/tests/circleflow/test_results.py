"""Tests for the CSV and JSON result writers."""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from circleflow.errors import InvalidInputError
from circleflow.extremals import ExtremalParams, Family, sample
from circleflow.results import (
    SCHEMA_VERSION,
    read_function_csv,
    write_function_csv,
    write_json,
    write_plot_data,
    write_table,
)
from circleflow.spectral_core import PeriodicFunction, from_trig_coefficients, grid


def test_write_table_with_metadata(tmp_path: Path) -> None:
    """Put sorted metadata on one comment line above the header."""
    path = tmp_path / "table.csv"
    write_table(path, ("t", "value", "ok"), [(0.5, 2, True)], {"seed": 3, "kind": "J_BS"})
    assert path.read_text(encoding="utf-8").splitlines() == [
        "# kind=J_BS seed=3",
        "t,value,ok",
        "0.5,2,true",
    ]


def test_write_table_without_metadata(tmp_path: Path) -> None:
    """Start with the header when there is no metadata."""
    path = tmp_path / "table.csv"
    write_table(path, ("a",), [(np.float64(0.1),)])
    assert path.read_text(encoding="utf-8") == "a\n0.1\n"


def test_write_json_is_sorted_and_versioned(tmp_path: Path) -> None:
    """Stamp the schema version, sort keys and map non-finite floats to null."""
    path = tmp_path / "summary.json"
    write_json(
        path,
        {"value": np.float64(1.5), "gap": math.inf, "flags": np.array([True]), "out": tmp_path},
    )
    text = path.read_text(encoding="utf-8")
    payload = json.loads(text)
    assert payload == {
        "flags": [True],
        "gap": None,
        "out": str(tmp_path),
        "schema_version": SCHEMA_VERSION,
        "value": 1.5,
    }
    assert list(payload) == sorted(payload)
    assert text.endswith("}\n")


def test_write_plot_data(tmp_path: Path) -> None:
    """Write whitespace-separated columns."""
    path = tmp_path / "trajectory.dat"
    write_plot_data(path, [0.0, 0.25], [1.0, -2.0])
    assert path.read_text(encoding="utf-8") == "0.0 1.0\n0.25 -2.0\n"


def test_function_csv_round_trip(tmp_path: Path) -> None:
    """Read back exactly what was written."""
    f = from_trig_coefficients([1.0, 0.2, -0.1, 0.05], 32)
    path = tmp_path / "factor.csv"
    write_function_csv(path, f, {"n": 32})
    back = read_function_csv(path)
    assert np.array_equal(back.values, f.values)


def test_function_csv_round_trip_is_bit_exact_on_own_grid(tmp_path: Path) -> None:
    """Keep every bit of a transcendental factor when read back on its own grid."""
    f = sample(ExtremalParams(Family.BS, 1.0, 1.5, 0.4), 256)
    path = tmp_path / "extremal.csv"
    write_function_csv(path, f)
    assert np.array_equal(read_function_csv(path, 256).values, f.values)


def test_read_function_csv_resamples(tmp_path: Path) -> None:
    """Move a band-limited factor to the requested grid."""
    path = tmp_path / "factor.csv"
    write_function_csv(path, from_trig_coefficients([2.0, 0.5], 16))
    back = read_function_csv(path, n=64)
    assert back.n == 64
    assert np.allclose(back.values, 2.0 + 0.5 * np.cos(grid(64)), atol=1e-13)


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _rows(n: int, shift: float = 0.0) -> str:
    nodes = 2.0 * np.pi * np.arange(n) / n
    return "".join(f"{float(t) + shift!r},1.0\n" for t in nodes)


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("x,y\n" + _rows(16), "theta,value"),
        ("", "theta,value"),
        ("theta,value\n" + _rows(16).replace("1.0", "abc", 1), "non-numeric"),
        ("theta,value\n" + _rows(16).replace(",1.0", ",1.0,2.0"), "exactly two columns"),
        ("theta,value\n" + _rows(15), "Grid size"),
        ("theta,value\n" + _rows(16, shift=0.01), "uniform grid"),
    ],
)
def test_read_function_csv_rejects_bad_files(tmp_path: Path, text: str, message: str) -> None:
    """Raise InvalidInputError for malformed input."""
    path = _write(tmp_path / "bad.csv", text)
    with pytest.raises(InvalidInputError, match=message):
        read_function_csv(path)


def test_read_function_csv_missing_file(tmp_path: Path) -> None:
    """Report a missing file as invalid input."""
    with pytest.raises(InvalidInputError, match="Could not read factor CSV"):
        read_function_csv(tmp_path / "absent.csv")


def test_read_function_csv_skips_comments(tmp_path: Path) -> None:
    """Ignore metadata lines."""
    path = _write(tmp_path / "factor.csv", "# note=1\ntheta,value\n" + _rows(16))
    assert np.allclose(read_function_csv(path).values, 1.0)


def test_written_factor_is_positive_function(tmp_path: Path) -> None:
    """Keep the constant factor constant through a round trip."""
    path = tmp_path / "one.csv"
    write_function_csv(path, PeriodicFunction.constant(1.0, 16))
    assert read_function_csv(path).min() == 1.0
