"""Stationary fronts of two coupled inhomogeneous sine-Gordon equations."""
__version__ = "0.1.0"
