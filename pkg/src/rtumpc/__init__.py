"""Convex data-driven MPC for rooftop-unit HVAC with demand response."""

__version__ = "0.1.0"
