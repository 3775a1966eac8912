"""Uplink interference statistics: per-cell fits, error bounds, validation."""

__version__ = "0.1.0"
