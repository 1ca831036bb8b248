"""Frequency-unit conversion.

User-facing frequencies (trap parameters, couplings, J0) are conventional
kHz. Hamiltonians, energies and fields inside the dynamics are angular
(rad/ms), so that ``exp(-1j * E * t)`` with ``t`` in ms is the evolution
phase. ``to_angular`` is the single place the factor 2*pi enters.
"""
import math

TWO_PI = 2.0 * math.pi


def to_angular(f_khz):
    """Conventional kHz -> angular rad/ms (works on scalars and arrays)."""
    return TWO_PI * f_khz


def to_conventional(w_rad_per_ms):
    return w_rad_per_ms / TWO_PI
