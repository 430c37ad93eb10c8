"""Robust adaptive beamforming toolkit."""
