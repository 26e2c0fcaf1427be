"""Anisotropic norms, transfer operators and dynamical determinants for torus maps."""

__version__ = "0.1.0"
