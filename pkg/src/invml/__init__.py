"""Invertible manifold learning: exact-inverse encoders, losses, metrics."""

__version__ = "0.1.0"
