"""Singular steady states of 2D Euler near a hyperbolic corner, with diagnostics."""
__version__ = "0.1.0"
