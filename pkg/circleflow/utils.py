"""Utility helpers shared across circleflow."""

import logging
import os


def setup_logging(level: str | None = None) -> None:
    """Set up global logging configuration for circleflow.

    Call this once at process start (the CLI does). ``level`` overrides the
    ``LOGLEVEL`` environment variable.
    """
    loglevel = (level or os.environ.get("LOGLEVEL", "INFO")).upper()
    numeric = getattr(logging, loglevel, logging.INFO)
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


def format_float(value: float) -> str:
    """Return the shortest repr that round-trips ``value`` exactly."""
    return repr(float(value))
