"""Conformal-prediction guided sampling for RRT* motion planning."""

__version__ = "0.1.0"
