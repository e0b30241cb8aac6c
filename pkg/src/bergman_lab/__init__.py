"""Numerical laboratory for Bergman geometry on pseudoconvex model domains."""
__version__ = "0.1.0"
