"""Fusion of probabilistic torque controllers learned from demonstrations."""

__version__ = "0.1.0"
