"""Amenability diagnostics for graph extensions of symbolic Markov maps."""

__version__ = "0.1.0"
