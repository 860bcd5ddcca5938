"""Numerical laboratory for eta invariants, spectral flow and Chern
transgression forms on flat model geometries."""

__version__ = "0.1.0"
