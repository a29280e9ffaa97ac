"""Exact gap satisfiability for bounded mixed-integer bilinear systems."""

__version__ = "0.1.0"
