"""circleflow test suites."""
