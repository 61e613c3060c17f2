"""Unit commitment with AC power flows."""

__version__ = "0.1.0"
