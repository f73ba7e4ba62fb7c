"""Spacetime codes, syndrome-data noise learning and logical error prediction."""

__version__ = "0.1.0"
