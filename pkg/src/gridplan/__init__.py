"""Desk-scale capacity-expansion planning for a shared river basin."""

__version__ = "0.1.0"
