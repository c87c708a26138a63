"""Agnostic ReLU regression under Gaussian marginals: Hermite analysis, the
sparse-parity reduction, halfspace-based approximation, and SQ simulation."""

__version__ = "0.1.0"
