"""Finite-dimensional operator systems with certificate-producing cone checks."""

__version__ = "0.1.0"
