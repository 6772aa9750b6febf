"""Time-domain backscattering laboratory for compactly supported potentials in 3-D."""

__version__ = "0.1.0"
