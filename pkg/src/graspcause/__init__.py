"""Causal effect estimation for hand-selection events in household manipulation."""

__version__ = "0.1.0"
