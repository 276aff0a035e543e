"""Opponent-aware gradient learning in transparent two-player games."""

__version__ = "0.1.0"
