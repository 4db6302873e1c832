"""Sudden-quench dynamics of a particle in an infinite well or a harmonic trap."""

__version__ = "0.1.0"
