"""Exact chain-level calculus on foliated polynomial charts."""

__version__ = "0.1.0"
