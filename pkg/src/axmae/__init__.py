"""Axis-wise masked pre-training for spatiotemporal series forecasting."""

__version__ = "0.1.0"
