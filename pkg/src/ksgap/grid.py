"""Radial grids in the squared-radius variable s = r**2 and quadrature on them."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing nodes in s = r**2, starting just off the origin.

    Spacing is geometric with the given ratio until it reaches ``max_spacing``,
    after which it is uniform up to ``s_max``. The first node lies at ``s0`` so
    that series expansions at the origin can seed integrations.
    """

    nodes: np.ndarray
    s0: float
    ratio: float
    max_spacing: float
    s_max: float

    @classmethod
    def geometric(cls, s0=1e-6, ratio=1.02, s_max=400.0, max_spacing=0.1):
        if not (s0 > 0 and ratio > 1 and s_max > s0 and max_spacing > 0):
            raise ValueError("grid needs 0 < s0 < s_max, ratio > 1, max_spacing > 0")
        pts = [s0]
        s = s0
        while True:
            step = min(s * (ratio - 1.0), max_spacing)
            s = s + step
            if s >= s_max * (1 - 1e-12):
                break
            pts.append(s)
        nodes = np.asarray(pts + [s_max])
        # avoid a sliver as last cell
        if nodes.size > 2 and nodes[-1] - nodes[-2] < 0.25 * (nodes[-2] - nodes[-3]):
            nodes = np.delete(nodes, -2)
        return cls(nodes, float(s0), float(ratio), float(max_spacing), float(s_max))

    @classmethod
    def with_nodes(cls, count, s0=1e-6, s_max=400.0):
        """Purely geometric grid with ``count`` nodes."""
        if count < 4:
            raise ValueError("need at least 4 nodes")
        nodes = np.geomspace(s0, s_max, count)
        ratio = float(nodes[1] / nodes[0])
        return cls(nodes, float(s0), ratio, float(nodes[-1] - nodes[-2]), float(s_max))

    @classmethod
    def from_nodes(cls, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 4 or nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        d = np.diff(nodes)
        return cls(nodes, float(nodes[0]), float(np.max(d[1:] / d[:-1])), float(d.max()), float(nodes[-1]))

    def refined(self):
        """Grid with roughly half the spacing everywhere."""
        return RadialGrid.geometric(self.s0, np.sqrt(self.ratio), self.s_max, self.max_spacing / 2)

    def truncated(self, s_end):
        """Nodes up to and including the first node >= s_end."""
        k = int(np.searchsorted(self.nodes, s_end))
        return self.nodes[: min(k + 1, self.nodes.size)]

    @property
    def s(self):
        return self.nodes

    @property
    def r(self):
        return np.sqrt(self.nodes)

    def __len__(self):
        return self.nodes.size


def _origin_piece(s, g):
    # integral over [0, s[0]] by linear extrapolation of g
    slope = (g[1] - g[0]) / (s[1] - s[0])
    return s[0] * (g[0] - 0.5 * s[0] * slope)


def cumulative(s, g):
    """Running integral of g from 0 to each node.

    The integrand is splined in t = log s against g*s, which keeps the
    geometric part of the grid uniform in the spline variable.
    """
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    t = np.log(s)
    spl = CubicSpline(t, g * s)
    out = spl.antiderivative()(t)
    return out - out[0] + _origin_piece(s, g)


def cumulative_log(s, h):
    """Running integral of log(t) h(t) from 0, exact for h linear on [0, s[0]]."""
    s = np.asarray(s, dtype=float)
    h = np.asarray(h, dtype=float)
    out = cumulative(s, np.log(s) * h)
    s0, L = s[0], np.log(s[0])
    slope = (h[1] - h[0]) / (s[1] - s0)
    # swap the linear-extrapolation origin piece for the exact one
    exact = h[0] * s0 * (L - 1) + slope * s0**2 * (1 - L) / 2
    return out - _origin_piece(s, np.log(s) * h) + exact


def integrate(s, g):
    """Integral of g over [0, s[-1]]."""
    return float(cumulative(s, g)[-1])


def tail_cumulative(s, g):
    """Integral of g from each node to s[-1]."""
    c = cumulative(s, g)
    return c[-1] - c
