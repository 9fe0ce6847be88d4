"""Gibbs stability laboratory on weighted P^1."""

__version__ = "0.1.0"
