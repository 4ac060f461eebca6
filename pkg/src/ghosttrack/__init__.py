"""Multipath extended-object tracking with labeled random finite sets."""

__version__ = "0.1.0"
