"""Seeded Monte Carlo simulation of parcel carrier selection."""

__version__ = "0.1.0"
