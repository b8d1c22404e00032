"""Tail exponents of realized prices under random trade timing."""

__version__ = "0.1.0"
