"""Latent-tree sequence modeling toolkit."""

__version__ = "0.1.0"
