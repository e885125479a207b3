"""Iterative plan-retrieve-generate engine for long-form question answering."""

__version__ = "0.1.0"
