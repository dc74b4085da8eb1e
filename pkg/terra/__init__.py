"""This module implements the TERRA beam-management simulator."""

__version__ = "0.1.0"
