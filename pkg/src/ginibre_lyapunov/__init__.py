"""Finite-t Lyapunov exponents of products of Ginibre-type random matrices."""

__version__ = "0.1.0"
