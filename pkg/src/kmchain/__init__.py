"""Simulation and bound computations for the Klee-Minty random-edge bit-flip chain."""

__version__ = "0.1.0"
