"""Exact series engine for invariance relations of multiplicative characteristic classes."""

__version__ = "0.1.0"
