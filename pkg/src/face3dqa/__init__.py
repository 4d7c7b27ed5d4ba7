"""Subjective quality assessment toolkit for AI-generated 3D human-face media."""

__version__ = "0.1.0"
