"""Numerical kernels: discretization, banded/bordered linear algebra, homotopy, tracer, oracles."""
