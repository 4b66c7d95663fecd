"""Collaborative data offloading from LEO satellites to commercial ground dishes."""

__version__ = "0.1.0"
