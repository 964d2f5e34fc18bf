"""CSV and JSON result writers.

CSV files carry one ``#`` metadata line followed by a header row; JSON files
are flat, sorted and versioned with ``schema_version``. Angles are radians and
keys carry a unit suffix where one applies (``alpha_rad``). Every file is
written atomically through :mod:`circleflow.yaml_store`.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
import csv
import io
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

from circleflow.errors import InvalidInputError
from circleflow.spectral_core import PeriodicFunction, check_grid_size, grid, resample
from circleflow.utils import format_float
from circleflow.yaml_store import write_text_file

_logger: logging.Logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    return str(value)


def _metadata_line(metadata: Mapping[str, Any]) -> str:
    return "# " + " ".join(f"{key}={_cell(metadata[key])}" for key in sorted(metadata))


def write_table(
    path: Path,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
    metadata: Mapping[str, Any] | None = None,
) -> None:
    """Write a CSV table with an optional single ``#`` metadata line."""
    buffer = io.StringIO()
    if metadata:
        buffer.write(_metadata_line(metadata) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(value) for value in row])
    write_text_file(path, buffer.getvalue())
    _logger.debug("[Results] wrote %s", path)


def write_function_csv(
    path: Path, f: PeriodicFunction, metadata: Mapping[str, Any] | None = None
) -> None:
    """Write nodal values as ``theta,value`` rows."""
    write_table(path, ("theta", "value"), zip(f.theta, f.values, strict=True), metadata)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # JSON has no inf/nan
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(path: Path, payload: Mapping[str, Any]) -> None:
    """Write a sorted JSON summary stamped with ``schema_version``."""
    document = {"schema_version": SCHEMA_VERSION, **_jsonable(payload)}
    write_text_file(path, json.dumps(document, sort_keys=True, indent=2) + "\n")
    _logger.debug("[Results] wrote %s", path)


def write_plot_data(path: Path, x: Sequence[float], y: Sequence[float]) -> None:
    """Write whitespace-separated two-column data for gnuplot."""
    lines = [f"{format_float(a)} {format_float(b)}" for a, b in zip(x, y, strict=True)]
    write_text_file(path, "\n".join(lines) + "\n")


def read_function_csv(path: Path, n: int | None = None) -> PeriodicFunction:
    """Read a ``theta,value`` CSV of nodal values on the uniform grid.

    Rows must sit on the uniform grid of their own size. With ``n`` the samples
    are resampled spectrally.

    Raises:
        InvalidInputError: If the file is unreadable, malformed or off-grid.
    """
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeError) as err:
        raise InvalidInputError(f"Could not read factor CSV {path}: {err}") from err
    rows = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or [cell.strip() for cell in header] != ["theta", "value"]:
        raise InvalidInputError(f"{path}: expected a 'theta,value' header")
    try:
        data = np.array([[float(cell) for cell in row] for row in reader], dtype=float)
    except ValueError as err:
        raise InvalidInputError(f"{path}: non-numeric entry ({err})") from err
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidInputError(f"{path}: every row needs exactly two columns")
    try:
        size = check_grid_size(data.shape[0])
    except ValueError as err:
        raise InvalidInputError(f"{path}: {err}") from err
    if not np.allclose(data[:, 0], grid(size), rtol=0.0, atol=1e-9):
        raise InvalidInputError(f"{path}: theta column is not the uniform grid 2*pi*j/{size}")
    f = PeriodicFunction(data[:, 1].copy())
    return f if n is None else resample(f, n)
