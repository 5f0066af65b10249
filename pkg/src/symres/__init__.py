"""Operator calculus on symmetric tensors over hyperbolic model geometries."""

__version__ = "0.1.0"
