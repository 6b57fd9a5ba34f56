"""Toda-type lattice dynamics on weighted Z-graded graphs."""

__version__ = "0.1.0"
