"""Network structure inference for linear dynamical systems under colored noise."""

__version__ = "0.1.0"
