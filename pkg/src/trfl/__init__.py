"""Temporal receptive fields of 3D convolutional video models."""
__version__ = "0.1.0"
