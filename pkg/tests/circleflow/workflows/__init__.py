"""End-to-end command-line workflow tests."""
