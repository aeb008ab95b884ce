"""Flood-related tweet filtering and location extraction."""

__version__ = "0.1.0"
