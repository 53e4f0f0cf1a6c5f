"""Operator attention allocation for simulated robot fleets."""

__version__ = "0.1.0"
