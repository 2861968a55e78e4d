"""Numerical lab for long-range scattering of the Maxwell-Schrodinger system in Coulomb gauge."""

__version__ = "0.1.0"
