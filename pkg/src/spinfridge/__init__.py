"""Spin-ensemble refrigeration of a microwave cavity mode."""
__version__ = "0.1.0"
