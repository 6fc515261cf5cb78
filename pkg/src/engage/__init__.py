"""Multimodal starting-engagement detection for a fixed social robot."""

__version__ = "0.1.0"
