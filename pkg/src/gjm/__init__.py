"""Generalized partial joint measurability of quantum measurements."""

__version__ = "0.1.0"
