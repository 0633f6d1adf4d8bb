"""Bivariate gamma-geometric toolkit: laws, samplers, fitting and the log-return run analysis."""

__version__ = "1.0.0"
