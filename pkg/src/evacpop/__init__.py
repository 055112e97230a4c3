"""Synthetic activity-plan populations with bushfire-response attributes."""

__version__ = "0.1.0"
