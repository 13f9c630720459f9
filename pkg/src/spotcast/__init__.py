"""Venue-category forecasting from self-reported check-in streams."""

__version__ = "0.1.0"
