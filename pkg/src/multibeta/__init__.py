"""Multiscale affine-approximation (beta number) toolkit."""

__version__ = "0.1.0"
