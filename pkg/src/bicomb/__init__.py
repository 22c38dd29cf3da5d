"""Tight spans, combinatorial dimension, geodesic bicombings and the boundary
at infinity, computed on small concrete spaces."""

__version__ = "0.1.0"
