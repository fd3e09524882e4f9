"""Simulation and lattice bounds for percolation in the secure-connectivity graph."""

__version__ = "0.1.0"
