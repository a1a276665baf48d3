"""Conformal robust beamforming for MISO downlinks."""

__version__ = "0.1.0"
