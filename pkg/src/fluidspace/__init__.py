"""Curvature, perfect-fluid and soliton analysis of 4-dimensional Lorentzian metrics."""

__version__ = "1.0.0"
