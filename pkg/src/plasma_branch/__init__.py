"""Constrained plasma branch on the unit-volume ball."""

__version__ = "0.1.0"
