"""Numerical verification toolkit for quaternionic contact geometry."""

__version__ = "0.1.0"
