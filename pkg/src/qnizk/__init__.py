"""Desk-scale NIZK argument system for QMA with CRS setup and preprocessing."""

__version__ = "0.1.0"
