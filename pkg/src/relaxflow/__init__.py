"""Constant and variable relaxed schemes for hyperbolic conservation laws."""

__version__ = "0.1.0"
