"""Numerical construction and certification of positive-scalar-curvature
metrics on rotationally symmetric model spaces."""

__version__ = "0.1.0"
