"""Deterministic stock-and-flow simulator of county preterm-birth dynamics."""

__version__ = "0.1.0"
