"""Unpaired super-resolution of coarse fluid simulations with diffusion bridges."""

__version__ = "0.1.0"
