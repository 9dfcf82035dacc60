"""Piecewise-linear feedback synthesis for discrete-time switched linear systems."""

__version__ = "0.1.0"
