"""Simulation toolkit for readout-error-mitigated adaptive quantum state tomography."""

__version__ = "0.1.0"
