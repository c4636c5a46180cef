"""Renewable capacity factors, zonal demand and mean-variance optimal PV/wind mixes."""

__version__ = "0.1.0"
