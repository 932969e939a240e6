"""Langevin-type samplers and Phi-divergence mixing bounds."""

__version__ = "0.1.0"
