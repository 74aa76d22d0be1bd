"""Spin-orbit-torque domain-wall synapse co-simulation toolkit."""

__version__ = "0.1.0"
