"""Simulation and decay analysis for two wave equations coupled by velocities."""

__version__ = "0.1.0"
