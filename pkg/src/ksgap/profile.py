"""Self-similar stationary profiles in cumulated form.

With s = r**2 the cumulated density Phi(s) of the stationary solution solves

    Phi'' + Phi'/2 + Phi Phi' / (2 s) = 0,   Phi(0) = 0,   Phi'(0) = a,

and gives back n(r) = 2 Phi'(r**2), M = 2 pi Phi(inf) and -r c'(r) = Phi(r**2).
We integrate (Phi, w) with w = log Phi', which keeps Phi' positive and keeps
its Gaussian tail at full relative accuracy.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .errors import ConvergenceError, IntegrationError, PreconditionError
from .grid import RadialGrid, cumulative_log, integrate

CRITICAL_MASS = 8 * np.pi
RTOL = 1e-12
ATOL = 1e-14


def profile_series(a, s):
    """Third-order expansion of (Phi, Phi') at the origin."""
    c2 = -a * (1 + a) / 4
    c3 = -c2 * (2 + 3 * a) / 12
    return a * s + c2 * s**2 + c3 * s**3, a + 2 * c2 * s + 3 * c3 * s**2


def start_point(a, s0):
    """Where to seed the series so that the neglected terms stay below 1e-12."""
    return min(s0, 1e-4 / (1.0 + a))


def _rhs(s, y):
    phi, w = y
    return [np.exp(w), -0.5 - phi / (2 * s)]


def _rhs_var(s, y):
    # profile plus its derivative with respect to the slope a (phi_a, F_a = phi_a'/Phi')
    phi, w, v, f = y
    return [np.exp(w), -0.5 - phi / (2 * s), np.exp(w) * f, -v / (2 * s)]


def _check(sol):
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        loc = float(sol.t[-1]) if sol.t.size else None
        raise IntegrationError(f"profile integration failed: {sol.message}", loc)


def integrate_phi(a, grid, rtol=RTOL, atol=ATOL):
    """Phi and Phi' on the grid nodes for slope ``a``."""
    if not a > 0:
        raise PreconditionError("slope a must be positive")
    s_start = start_point(a, grid.s0)
    p0, d0 = profile_series(a, s_start)
    sol = solve_ivp(_rhs, (s_start, grid.s_max), [p0, np.log(d0)], method="DOP853",
                    t_eval=grid.nodes, rtol=rtol, atol=atol)
    _check(sol)
    return sol.y[0], np.exp(sol.y[1])


def mass_of(a, s_max=400.0, rtol=RTOL, atol=ATOL, tail_tol=1e-10):
    """Total mass 2 pi Phi(s_max) and a bound on the mass beyond s_max.

    Since Phi'' <= -Phi'/2 the tail is at most 4 pi Phi'(s_max).
    """
    if not a > 0:
        raise PreconditionError("slope a must be positive")
    s_start = start_point(a, 1e-6)
    p0, d0 = profile_series(a, s_start)
    sol = solve_ivp(_rhs, (s_start, s_max), [p0, np.log(d0)], method="DOP853",
                    rtol=rtol, atol=atol)
    _check(sol)
    phi_end, w_end = sol.y[:, -1]
    tail = 4 * np.pi * np.exp(w_end)
    if tail > tail_tol:
        raise PreconditionError(f"s_max={s_max} too small: mass tail bound {tail:.3g}")
    return 2 * np.pi * phi_end, tail


@dataclass
class StationaryProfile:
    """Stationary profile of mass ``mass`` sampled on ``grid``.

    ``dphi_da`` and ``dF_da`` hold the derivative of the family with respect to
    the slope a (cumulated form and divided by Phi'), which spans the kernel of
    the radial linearization.
    """

    mass: float
    slope: float
    grid: RadialGrid
    phi: np.ndarray
    dphi: np.ndarray
    c_inf: np.ndarray
    f00: np.ndarray
    mu0_prime: float
    dphi_da: np.ndarray = field(repr=False)
    dF_da: np.ndarray = field(repr=False)
    dmass_da: float = 0.0
    tail_bound: float = 0.0

    @property
    def s(self):
        return self.grid.nodes

    @property
    def r(self):
        return self.grid.r

    @property
    def n_inf(self):
        return 2 * self.dphi

    @property
    def alpha(self):
        return self.mass / (2 * np.pi)

    def interpolate_phi(self, s):
        """Phi at arbitrary s >= 0 (Hermite interpolation, constant past s_max)."""
        s = np.asarray(s, dtype=float)
        nodes = np.concatenate([[0.0], self.s])
        vals = np.concatenate([[0.0], self.phi])
        ders = np.concatenate([[self.slope], self.dphi])
        spl = CubicHermiteSpline(nodes, vals, ders)
        out = spl(np.clip(s, 0, self.grid.s_max))
        return np.where(s > self.grid.s_max, self.alpha, out)

    def interpolate_dphi(self, s):
        """Phi' at arbitrary s >= 0, via log-linear interpolation of w = log Phi'."""
        s = np.asarray(s, dtype=float)
        w = np.log(self.dphi)
        dw = -0.5 - self.phi / (2 * self.s)
        spl = CubicHermiteSpline(self.s, w, dw)
        inner = np.exp(spl(np.clip(s, self.s[0], self.grid.s_max)))
        return inner


def _integrate_with_variation(a, grid, rtol=RTOL, atol=ATOL):
    s_start = start_point(a, grid.s0)
    p0, d0 = profile_series(a, s_start)
    b1 = -(1 + 2 * a) / 4
    c2 = -a * (1 + a) / 4
    b2 = -(1.5 * c2 + (1 + a) * b1 + 2 * a * b1 / 4) / 6
    v0 = s_start + b1 * s_start**2 + b2 * s_start**3
    dv0 = 1 + 2 * b1 * s_start + 3 * b2 * s_start**2
    sol = solve_ivp(_rhs_var, (s_start, grid.s_max), [p0, np.log(d0), v0, dv0 / d0],
                    method="DOP853", t_eval=grid.nodes, rtol=rtol, atol=atol)
    _check(sol)
    return sol.y


def find_slope(mass, s_max=400.0, rtol=RTOL, atol=ATOL):
    """Slope a = Phi'(0) with 2 pi Phi(inf) = mass, by bracketing root search in log a."""
    if not 0 < mass < CRITICAL_MASS:
        raise PreconditionError(
            f"mass must lie in (0, 8*pi) = (0, {CRITICAL_MASS:.6f}); got {mass}")

    def g(x):
        return mass_of(np.exp(x), s_max, rtol, atol)[0] - mass

    lo, hi = np.log(mass / (8 * np.pi)), np.log(10 * mass / (4 * np.pi))
    for _ in range(60):
        if g(lo) < 0:
            break
        lo -= np.log(10)
    else:
        raise ConvergenceError("could not bracket the slope from below")
    for _ in range(60):
        if g(hi) > 0:
            break
        hi += np.log(10)
    else:
        raise ConvergenceError("could not bracket the slope from above")
    x = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(np.exp(x))


def solve_stationary(mass, grid=None, tol=1e-9, rtol=RTOL, atol=ATOL):
    """Stationary profile of the given subcritical mass."""
    grid = RadialGrid.geometric() if grid is None else grid
    a = find_slope(mass, grid.s_max, rtol, atol)
    phi, w, v, f = _integrate_with_variation(a, grid, rtol, atol)
    dphi = np.exp(w)
    defect = abs(2 * np.pi * phi[-1] - mass)
    if defect > tol:
        raise ConvergenceError(f"mass defect {defect:.3g} exceeds tol {tol:.3g}")
    prof = StationaryProfile(
        mass=float(mass), slope=a, grid=grid, phi=phi, dphi=dphi,
        c_inf=np.empty(0), f00=np.empty(0), mu0_prime=np.nan,
        dphi_da=v, dF_da=f, dmass_da=2 * np.pi * v[-1],
        tail_bound=4 * np.pi * dphi[-1],
    )
    prof.c_inf = reconstruct_potential(prof)
    prof.f00, prof.mu0_prime = kernel_mode(prof)
    return prof


def _tail_log(s, h):
    c = cumulative_log(s, h)
    return c[-1] - c


def _log_potential(s, phi, dphi):
    # G * u at r = sqrt(s) for a radial u with cumulated mass 2 pi phi:
    # -(1/2)[phi(s) log s + int_s^inf log(t) phi'(t) dt]
    return -0.5 * (phi * np.log(s) + _tail_log(s, dphi))


def reconstruct_potential(profile):
    """c_inf on the grid with the logarithmic Green normalization.

    c(r) = -(1/2 pi) [log r m(r) + int_{|y|>r} log|y| n dy], m(r) the enclosed mass.
    """
    return _log_potential(profile.s, profile.phi, profile.dphi)


def kernel_mode(profile):
    """(f00, mu0') with f00 = d log n_inf / dM and f00 = mu0' + G*(f00 n_inf)."""
    dm = profile.dmass_da
    f00 = profile.dF_da / dm
    # f00 - G*(f00 n) is constant; read it off at the origin
    f00_0 = 1.0 / (profile.slope * dm)
    g0 = 0.5 * cumulative_log(profile.s, profile.dphi * f00)[-1]
    return f00, float(f00_0 + g0)


def kernel_potential(profile):
    """dc_inf/dM = G*(f00 n_inf) on the grid."""
    phi00 = profile.dphi_da / profile.dmass_da
    return _log_potential(profile.s, phi00, profile.dphi * profile.f00)


def mu0_prime_from_potential(profile):
    """mu0' = (1/M)[1 - int dc/dM n dx], an alternative to ``kernel_mode``."""
    gc = kernel_potential(profile)
    return (1 - np.pi * integrate(profile.s, gc * 2 * profile.dphi)) / profile.mass


def mu0(profile):
    """log n_inf(0) - c_inf(0)."""
    c0 = -0.5 * cumulative_log(profile.s, profile.dphi)[-1]
    return float(np.log(2 * profile.slope) - c0)


def kernel_residual(profile, rtol=1e-12, atol=1e-14):
    """Deviation of f00/f00(0) from the solution of f'' + f'/r + n f = 0, f(0)=1.

    The reference solution is integrated in r together with the profile, so the
    check is independent of how f00 was computed. Returns the sup deviation over
    s <= 60 relative to the sup of |f|.
    """
    a = profile.slope
    s_start = start_point(a, profile.grid.s0)
    p0, d0 = profile_series(a, s_start)
    r0 = np.sqrt(s_start)
    # f = 1 - a r^2 / 2 + ... since n(0) = 2a; f' = -a r
    y0 = [p0, np.log(d0), 1 - a * r0**2 / 2, -a * r0]

    def rhs(r, y):
        phi, w, f, g = y
        s = r * r
        n = 2 * np.exp(w)
        # d/dr = 2 r d/ds
        return [2 * r * np.exp(w), 2 * r * (-0.5 - phi / (2 * s)), g, -g / r - n * f]

    mask = profile.s <= 60.0
    r_eval = profile.r[mask]
    sol = solve_ivp(rhs, (r0, r_eval[-1]), y0, method="DOP853", t_eval=r_eval,
                    rtol=rtol, atol=atol)
    _check(sol)
    ref = sol.y[2]
    f = profile.f00[mask] / (1.0 / (a * profile.dmass_da))
    return float(np.max(np.abs(f - ref)) / np.max(np.abs(ref)))


def profile_residual(profile, rtol=1e-13, atol=1e-15):
    """Largest one-cell defect of the stored samples.

    Every cell [s_i, s_{i+1}] is integrated independently from the stored state
    at s_i and compared with the stored state at s_{i+1}. The result is relative
    to the scale of each component (Phi against M/2pi, Phi' pointwise).
    """
    s = profile.s
    lo, hi = s[:-1], s[1:]
    h = hi - lo
    y0 = np.concatenate([profile.phi[:-1], np.log(profile.dphi[:-1])])
    m = lo.size

    def rhs(tau, y):
        ss = lo + tau * h
        phi, w = y[:m], y[m:]
        return np.concatenate([h * np.exp(w), h * (-0.5 - phi / (2 * ss))])

    sol = solve_ivp(rhs, (0.0, 1.0), y0, method="DOP853", rtol=rtol, atol=atol)
    _check(sol)
    d_phi = np.abs(sol.y[:m, -1] - profile.phi[1:]) / profile.alpha
    d_w = np.abs(sol.y[m:, -1] - np.log(profile.dphi[1:]))
    return float(max(d_phi.max(), d_w.max()))
