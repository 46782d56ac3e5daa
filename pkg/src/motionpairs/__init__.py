"""Synthetic motion-focused video-text pairs."""

__version__ = "0.1.0"
