"""Temporal abstraction, time-interval pattern mining, and cohort comparison."""

__version__ = "0.1.0"
