"""Numerical laboratory for discrete restriction on the cubic curve (n, n^3)."""

__version__ = "0.1.0"
