"""Harmonic extraction and seasonal cycles from daily environmental time series."""

__version__ = "0.1.0"
