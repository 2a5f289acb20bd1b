"""Discrete element method for rigid particles bounded by surfaces of revolution."""

__version__ = "0.1.0"
