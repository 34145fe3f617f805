"""Simulation and tail-asymptotics toolkit for spherical fractional Brownian motion."""

__version__ = "0.1.0"

from . import asymptotics, constants, engine, experiments, geometry, model, rng

__all__ = [
    "asymptotics",
    "constants",
    "engine",
    "experiments",
    "geometry",
    "model",
    "rng",
    "__version__",
]
