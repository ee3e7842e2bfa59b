"""Lifted random duality engine for Gaussian linear feasibility problems."""
__version__ = "0.1.0"
