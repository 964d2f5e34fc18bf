"""Tests for the circleflow package."""
