"""Normalized-step subgradient methods with built-in guarantee checks."""

__version__ = "0.1.0"
