"""Quadratic microresonator frequency combs: dynamics, entanglement, squeezing."""

__version__ = "0.1.0"
