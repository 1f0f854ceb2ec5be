"""Rooftop solar panel assessment pipeline."""

__version__ = "0.1.0"
