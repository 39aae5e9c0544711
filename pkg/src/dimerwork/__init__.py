"""Quantum work statistics for a thermally prepared, driven Hubbard dimer."""

__version__ = "0.1.0"
