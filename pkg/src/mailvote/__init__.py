"""Verifiable remote voting with paper assurance, at desk scale."""

__version__ = "0.1.0"
