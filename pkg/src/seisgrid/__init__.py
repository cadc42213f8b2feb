"""Monte Carlo seismic damage and recovery simulation for bus-branch grid models."""

__version__ = "0.1.0"
