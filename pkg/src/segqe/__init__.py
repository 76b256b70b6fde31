"""Greedy construction of ground-state circuits from classical-shadow estimates."""

__version__ = "0.1.0"
