"""Numerical laboratory for self-dual U(1) gauged Ginzburg-Landau energies on flat tori."""

__version__ = "0.1.0"
