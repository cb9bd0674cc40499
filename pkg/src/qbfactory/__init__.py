"""Simulator and verification harness for classical and Bell-measurement Bernoulli factories."""

__version__ = "0.1.0"
