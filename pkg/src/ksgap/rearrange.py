"""Radially symmetric non-increasing rearrangement and the domination test.

A radial density sampled at nodes s_i = r_i**2 is treated as piecewise
constant on annuli whose area boundaries are pi times the midpoints between
nodes. Sorting the annuli by value (largest first) and stacking their areas
gives the rearranged density u_* as a step function of the area variable
sigma, and its running integral k0(sigma), which is concave.
"""

from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError


@dataclass
class RearrangedDatum:
    """Step-function rearrangement: u_* equals ``u_star[i]`` for sigma in (edges[i], edges[i+1])."""

    edges: np.ndarray
    u_star: np.ndarray
    k0: np.ndarray

    @property
    def sigma(self):
        return self.edges[1:]

    @property
    def mass(self):
        return float(self.k0[-1])

    def norm(self, p):
        area = np.diff(self.edges)
        if np.isinf(p):
            return float(self.u_star.max(initial=0.0))
        return float(np.sum(self.u_star**p * area) ** (1 / p))

    def value_at(self, sigma):
        """u_* at arbitrary areas (0 beyond the last edge)."""
        sigma = np.asarray(sigma, dtype=float)
        i = np.searchsorted(self.edges, sigma, side="right") - 1
        inside = (i >= 0) & (i < self.u_star.size)
        return np.where(inside, self.u_star[np.clip(i, 0, self.u_star.size - 1)], 0.0)


def annulus_edges(s):
    """Area boundaries of the annuli attached to nodes s (first starts at 0)."""
    s = np.asarray(s, dtype=float)
    mid = 0.5 * (s[1:] + s[:-1])
    return np.pi * np.concatenate([[0.0], mid, [s[-1] + 0.5 * (s[-1] - s[-2])]])


def cell_norm(s, u, p):
    """L^p norm of the step function attached to radial samples."""
    area = np.diff(annulus_edges(s))
    if np.isinf(p):
        return float(np.max(u))
    return float(np.sum(np.asarray(u) ** p * area) ** (1 / p))


def rearrange_radial(s, u):
    """Non-increasing rearrangement of radial samples ``u`` at nodes ``s`` (s = r**2)."""
    s = np.asarray(s, dtype=float)
    u = np.asarray(u, dtype=float)
    if s.shape != u.shape or s.ndim != 1 or s.size < 2:
        raise PreconditionError("s and u must be 1-D arrays of equal length >= 2")
    if np.any(np.diff(s) <= 0) or s[0] < 0:
        raise PreconditionError("nodes must be nonnegative and increasing")
    if np.any(u < 0):
        raise PreconditionError("density must be nonnegative")
    area = np.diff(annulus_edges(s))
    # stable sort keeps already non-increasing data in place
    order = np.argsort(-u, kind="stable")
    u_star = u[order]
    a = area[order]
    edges = np.concatenate([[0.0], np.cumsum(a)])
    k0 = np.concatenate([[0.0], np.cumsum(u_star * a)])
    return RearrangedDatum(edges, u_star, k0)


@dataclass
class AssumptionReport:
    holds: bool
    worst_margin: float
    worst_sigma: float


def check_technical_assumption(datum, mass, eps, bound):
    """k0(sigma) <= 2 pi Phi_{M+eps}(sigma/pi) at every edge of the rearrangement.

    ``bound`` is the stationary profile of mass M + eps, or a callable
    returning it for a given mass. Checking at the edges is exact because k0
    is piecewise linear and the bound is concave.
    """
    if not 0 < eps < 8 * np.pi - mass:
        raise PreconditionError(f"eps must lie in (0, 8*pi - M) = (0, {8 * np.pi - mass:.6g})")
    prof = bound(mass + eps) if callable(bound) else bound
    if abs(prof.mass - (mass + eps)) > 1e-8 * (mass + eps):
        raise PreconditionError("bound profile has the wrong mass")
    cap = 2 * np.pi * prof.interpolate_phi(datum.edges / np.pi)
    margin = cap - datum.k0
    i = int(np.argmin(margin[1:])) + 1
    return AssumptionReport(bool(margin[i] >= -1e-12 * mass), float(margin[i]),
                            float(datum.edges[i]))
