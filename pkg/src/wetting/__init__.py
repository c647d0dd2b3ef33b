"""Simulation and numerical-verification toolkit for an elevated-boundary
random-walk wetting model: exact statics, corner-flip heat-bath dynamics,
spectral-gap analysis and metastable exit-time experiments."""

__version__ = "0.1.0"
