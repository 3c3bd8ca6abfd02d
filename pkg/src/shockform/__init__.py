"""Shock formation laboratory for strictly hyperbolic systems in 1D.

Modules
-------
- :mod:`shockform.spectral`: eigenstructure and interaction tensors
- :mod:`shockform.systems`: builtin systems and Galilean gauges
- :mod:`shockform.simplewave`: shocking simple waves and their certificates
- :mod:`shockform.eikonal`: evolution in eikonal coordinates
- :mod:`shockform.preshock`: preshock detection and modulation fits
- :mod:`shockform.cusp`: cubic cusp profile and homogeneous expansion checks
- :mod:`shockform.mghd`: future boundary of the maximal development
- :mod:`shockform.cli`: experiment runner
"""
from .systems import GaugeParams, SystemDefinition, builtin_system, galilean_transform

__version__ = "0.1.0"

__all__ = [
    "GaugeParams",
    "SystemDefinition",
    "builtin_system",
    "galilean_transform",
]
