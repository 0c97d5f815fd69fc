"""Simulation workbench comparing the traditional single-probe SAR
measurement pipeline with a fast probe-array system based on plane-wave
field reconstruction, including Monte Carlo uncertainty propagation."""

__version__ = "0.1.0"
