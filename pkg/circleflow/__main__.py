"""Entry point for ``python -m circleflow``."""

from circleflow.cli import main

raise SystemExit(main())
