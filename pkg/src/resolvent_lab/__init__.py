"""Numerical laboratory for singular values and Abel-Lidskii series of non-selfadjoint operators."""

__version__ = "0.1.0"
