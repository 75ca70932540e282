"""Generalized computation graphs for self-supervised collision avoidance."""

__version__ = "0.1.0"
