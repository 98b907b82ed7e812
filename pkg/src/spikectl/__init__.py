"""Spiking cerebellar Smith-predictor control of a simulated planar arm."""

__version__ = "0.1.0"
