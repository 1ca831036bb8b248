"""Ramsey-protocol retarded spin-spin Green's functions for the long-range
transverse-field Ising model of a trapped-ion chain."""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
