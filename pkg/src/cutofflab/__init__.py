"""Cutoff of rigid Langevin diffusions: exact Gaussian laws, simulation, distances and bounds."""

__version__ = "0.1.0"
