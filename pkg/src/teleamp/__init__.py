"""Simulation and analysis of heralded teleamplification on time-bin interferometers."""

__version__ = "0.1.0"
