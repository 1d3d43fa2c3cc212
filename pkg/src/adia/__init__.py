"""Adiabatic two-spin state preparation on circuit and pulse-level backends."""

__version__ = "0.1.0"
