"""Cyclist behavior toolkit: ride-trace analysis, distribution fitting, and
a four-way-intersection left-turn microsimulator."""

__version__ = "0.1.0"
