"""Discrete Korn-type rigidity seminorms on objective structures."""

__version__ = "0.1.0"
