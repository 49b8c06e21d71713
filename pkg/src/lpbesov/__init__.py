"""Littlewood-Paley pyramids and Besov-type norms on special Lipschitz domains."""

__version__ = "0.1.0"
