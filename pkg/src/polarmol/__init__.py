"""Model molecules in an optical cavity, solved on real-space grids."""

__version__ = "0.1.0"
