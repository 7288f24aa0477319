"""Spatiotemporal tubes for STL tasks: synthesis, certification and closed-loop control."""

__version__ = "0.1.0"
