"""Interacting Brownian particles on a torus: Gibbs sampling, Langevin dynamics and density-fluctuation fields."""

__version__ = "0.1.0"
