"""Fourier-mode analysis of Vekua-type operators on tori, the 3-sphere and products."""

__version__ = "0.1.0"
