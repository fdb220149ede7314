"""Thresholding orthogonal greedy learning over finite dictionaries."""

__version__ = "0.1.0"
