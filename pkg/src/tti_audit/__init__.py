"""Bias auditing toolkit for text-to-image systems."""

__version__ = "0.1.0"
