"""Simulation and design search for a latch-triggered bistable fin drive."""

__version__ = "0.1.0"
