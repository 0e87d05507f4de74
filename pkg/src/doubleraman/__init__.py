"""Momentum-space simulation of first- and third-order double Raman diffraction."""

__version__ = "0.1.0"
