"""Nonlocal Keller-Segel type model with critical fractional diffusion.

Pseudo-spectral solver, a priori quantities of the existence theory, and a
harness that checks those quantities against simulations.
"""
__version__ = "0.1.0"
