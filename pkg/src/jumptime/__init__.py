"""Jumptime topology laboratory: quantum-jump simulation of dissipative two-band lattices."""

__version__ = "0.1.0"
