"""Guidance wire-protocol service."""

__version__ = "0.1.0"
