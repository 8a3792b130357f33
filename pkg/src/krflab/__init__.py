"""Numerical laboratory for the Kahler-Ricci flow on Bl_p P^m and B x Bl_p P^m."""

__version__ = "0.1.0"
