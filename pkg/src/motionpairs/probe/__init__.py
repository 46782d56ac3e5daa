"""Alignment probe: motion features, a numpy dual encoder and retrieval metrics."""
