"""Numerical laboratory for 1-D compressible Euler flow with a physical vacuum boundary."""
