"""Desk-scale laboratory for topological transitivity and linear dynamics."""

__version__ = "0.1.0"
