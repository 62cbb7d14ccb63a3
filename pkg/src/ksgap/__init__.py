"""Spectral and dynamical study of self-similar Keller-Segel profiles in cumulated variables."""

from .grid import RadialGrid
from .profile import StationaryProfile, solve_stationary, mass_of, integrate_phi

__all__ = ["RadialGrid", "StationaryProfile", "solve_stationary", "mass_of", "integrate_phi"]
