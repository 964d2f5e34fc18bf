"""Integration tests spanning several circleflow modules."""
