"""Harmful-content measurement and search intervention toolkit."""

__version__ = "0.1.0"
