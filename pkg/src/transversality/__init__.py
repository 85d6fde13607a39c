"""Numerical estimators for transversality-type constants of pairs of sets."""

__version__ = "0.1.0"
