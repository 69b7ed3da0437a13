"""Numerical laboratory for twisted Hilbert spaces Z(phi) built from Lipschitz maps."""

__version__ = "0.1.0"
