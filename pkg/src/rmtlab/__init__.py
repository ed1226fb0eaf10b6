"""Sparse inhomogeneous symmetric random matrices: variance profiles, entry
laws, reproducible sampling, eigensolvers, semicircle analytics and exact
closed-walk moment oracles."""

__version__ = "0.1.0"
