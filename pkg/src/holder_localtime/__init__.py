"""Brownian local times along Hölder curves."""

__version__ = "0.1.0"
