"""Numerical laboratory for damped 2D Navier-Stokes with non-decaying data."""

__version__ = "0.1.0"
