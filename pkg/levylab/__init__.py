"""Malliavin calculus laboratory for finite-activity Levy processes."""
__version__ = "0.1.0"
