"""Radial evolution in self-similar variables, written for the cumulated density.

For radial solutions the cumulated density Phi(t, s), s = r**2, solves

    Phi_t = 4 s Phi_ss + 2 (Phi + s) Phi_s,   Phi(t, 0) = 0,   Phi(t, inf) = M / (2 pi),

and k(t, sigma) = 2 pi Phi(t, sigma / pi) is the mass inside the disc of area
sigma. The domain is truncated at s_end where the stationary tail is below
round-off. States are stored as a deviation from the discrete steady state so
that small perturbations keep full relative precision.

Time stepping is first-order IMEX: diffusion and drift are implicit with the
drift coefficient frozen at the previous step.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import ConvergenceError, PreconditionError
from . import forms
from .grid import integrate

log = logging.getLogger(__name__)

S_END = 60.0


def _fd_weights(x):
    """Three-point first and second derivative weights at interior nodes."""
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    d1 = np.stack([-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))])
    d2 = np.stack([2 / (hm * (hm + hp)), -2 / (hm * hp), 2 / (hp * (hm + hp))])
    return d1, d2


def _apply(w, u):
    return w[0] * u[:-2] + w[1] * u[1:-1] + w[2] * u[2:]


class EvolutionProblem:
    """Truncated grid, finite-difference operators and discrete steady state for one mass."""

    def __init__(self, profile, s_end=S_END):
        if s_end > profile.grid.s_max:
            raise PreconditionError("s_end beyond the profile grid")
        self.profile = profile
        inner = profile.s[: int(np.searchsorted(profile.s, s_end)) + 1]
        self.x = np.concatenate([[0.0], inner])
        self.k = inner.size
        self.mass = profile.mass
        self.d1, self.d2 = _fd_weights(self.x)
        self.reference = self._steady_state()
        self.d1_ref = _apply(self.d1, self.reference)

    @property
    def alpha(self):
        return self.mass / (2 * np.pi)

    def residual(self, Phi):
        xi = self.x[1:-1]
        return 4 * xi * _apply(self.d2, Phi) + 2 * (Phi[1:-1] + xi) * _apply(self.d1, Phi)

    def _banded(self, coef_drift, diag_extra=0.0):
        """Tridiagonal matrix of 4 x D2 + coef_drift D1 (+ diag_extra) on interior nodes."""
        xi = self.x[1:-1]
        lo = 4 * xi * self.d2[0] + coef_drift * self.d1[0]
        mid = 4 * xi * self.d2[1] + coef_drift * self.d1[1] + diag_extra
        up = 4 * xi * self.d2[2] + coef_drift * self.d1[2]
        m = xi.size
        ab = np.zeros((3, m))
        ab[0, 1:] = up[:-1]
        ab[1] = mid
        ab[2, :-1] = lo[1:]
        return ab, lo[0], up[-1]

    def _steady_state(self, tol=1e-12, maxiter=50):
        """Newton iteration for the discrete stationary equation (stops at the round-off floor)."""
        Phi = np.concatenate([[0.0], self.profile.phi[: self.k]])
        Phi[-1] = self.alpha
        xi = self.x[1:-1]
        for _ in range(maxiter):
            G = self.residual(Phi)
            ab, _, _ = self._banded(2 * (Phi[1:-1] + xi), 2 * _apply(self.d1, Phi))
            dPhi = solve_banded((1, 1), ab, -G)
            Phi[1:-1] += dPhi
            if np.max(np.abs(dPhi)) <= tol * self.alpha:
                G = self.residual(Phi)
                ab, _, _ = self._banded(2 * (Phi[1:-1] + xi), 2 * _apply(self.d1, Phi))
                Phi[1:-1] += solve_banded((1, 1), ab, -G)
                return Phi
        raise ConvergenceError("discrete steady state did not converge")

    def initial_state(self, Phi0, time=0.0):
        """State from cumulated-density samples on ``self.x``; endpoint values are enforced."""
        Phi0 = np.asarray(Phi0, dtype=float)
        if Phi0.shape != self.x.shape:
            raise PreconditionError("initial data must be sampled on the evolution grid")
        dev = Phi0 - self.reference
        dev[0] = 0.0
        dev[-1] = 0.0
        return EvolutionState(time, self, dev)

    def perturbed(self, deviation, time=0.0):
        dev = np.array(deviation, dtype=float)
        dev[0] = dev[-1] = 0.0
        return EvolutionState(time, self, dev)


@dataclass
class EvolutionState:
    """Cumulated density reference + deviation on the evolution grid at ``time``."""

    time: float
    problem: EvolutionProblem = field(repr=False)
    deviation: np.ndarray = field(repr=False)

    @property
    def s(self):
        return self.problem.x

    @property
    def sigma(self):
        return np.pi * self.problem.x

    @property
    def phi(self):
        return self.problem.reference + self.deviation

    @property
    def kappa(self):
        return 2 * np.pi * self.phi

    @property
    def mass(self):
        return float(self.kappa[-1])

    def density(self):
        """n = 2 dPhi/ds at the nodes (one-sided at the ends)."""
        x, P = self.problem.x, self.phi
        d = np.empty_like(x)
        d[1:-1] = _apply(self.problem.d1, P)
        d[0] = (P[1] - P[0]) / (x[1] - x[0])
        d[-1] = (P[-1] - P[-2]) / (x[-1] - x[-2])
        return 2 * d


def step(state, dt, mono_tol=1e-12):
    """One IMEX step; returns a new state."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    pb = state.problem
    xi = pb.x[1:-1]
    dev = state.deviation
    coef = 2 * (pb.reference[1:-1] + dev[1:-1] + xi)
    ab, _, _ = pb._banded(coef, 0.0)
    ab = -ab
    ab[1] += 1.0 / dt
    rhs = dev[1:-1] / dt + 2 * dev[1:-1] * pb.d1_ref
    new = np.zeros_like(dev)
    new[1:-1] = solve_banded((1, 1), ab, rhs)
    Phi = pb.reference + new
    jumps = np.diff(Phi)
    if jumps.min() < -16 * np.finfo(float).eps * pb.alpha:
        if jumps.min() < -mono_tol * pb.alpha:
            raise ConvergenceError(
                f"monotonicity lost at t={state.time + dt:.6g}; reduce dt")
        log.warning("clamping round-off monotonicity defect %.3g", jumps.min())
        new = np.maximum.accumulate(Phi) - pb.reference
        new[0] = new[-1] = 0.0
    return EvolutionState(state.time + dt, pb, new)


def step_absolute(problem, Phi, dt):
    """The same scheme applied to Phi itself (no deviation bookkeeping).

    Mathematically identical to ``step``; kept as a cross-check.
    """
    xi = problem.x[1:-1]
    ab, lo0, upN = problem._banded(2 * (Phi[1:-1] + xi), 0.0)
    ab = -ab
    ab[1] += 1.0 / dt
    rhs = Phi[1:-1] / dt
    rhs[0] += lo0 * Phi[0]
    rhs[-1] += upN * Phi[-1]
    out = Phi.copy()
    out[1:-1] = solve_banded((1, 1), ab, rhs)
    return out


def as_perturbation(state):
    """Radial perturbation (f, phi) of the stationary profile on the profile grid."""
    pb = state.problem
    prof = pb.profile
    dev = state.deviation
    spl = CubicSpline(pb.x, dev)
    k = pb.k
    phi = np.zeros_like(prof.s)
    dphi = np.zeros_like(prof.s)
    ddphi = np.zeros_like(prof.s)
    phi[:k] = dev[1:]
    dphi[:k] = spl(prof.s[:k], 1)
    ddphi[:k] = spl(prof.s[:k], 2)
    d = prof.dphi
    f = dphi / d
    # f' = phi''/Phi' - phi' Phi''/Phi'^2 with Phi'' = -Phi' (s + Phi)/(2 s)
    df = ddphi / d + f * (prof.s + prof.phi) / (2 * prof.s)
    mass = 2 * np.pi * dev[-1]
    scale = np.sqrt(2 * np.pi * max(integrate(prof.s, d * f * f), 0.0))
    zm = abs(mass) <= forms.ORTHO_TOL * max(scale, np.finfo(float).tiny)
    return forms.Perturbation(f, df, phi, zm, False, "evolution")


def weighted_distance(state):
    """int |n - n_inf|^2 / n_inf dx."""
    pert = as_perturbation(state)
    return forms.l2_weighted(state.problem.profile, pert)


def relative_q1(state):
    pert = as_perturbation(state)
    pert.zero_mass = True  # mass is pinned by the boundary values
    return forms.q1(state.problem.profile, pert)


@dataclass
class EvolutionTrace:
    times: np.ndarray
    q1: np.ndarray
    weighted_l2: np.ndarray
    mass_defect: np.ndarray
    min_density: np.ndarray
    states: list = field(default_factory=list, repr=False)

    def rows(self):
        return list(zip(self.times, self.q1, self.weighted_l2, self.mass_defect, self.min_density))


def run(initial, t_end, dt, checkpoint_every=10, keep_states=False):
    """Integrate to ``t_end`` and record diagnostics every ``checkpoint_every`` steps."""
    if not (t_end >= initial.time and dt > 0):
        raise PreconditionError("need t_end >= t0 and dt > 0")
    n_steps = int(round((t_end - initial.time) / dt))
    out = {k: [] for k in ("t", "q1", "l2", "md", "nmin")}
    states = []

    def record(st):
        out["t"].append(st.time)
        out["q1"].append(relative_q1(st))
        out["l2"].append(weighted_distance(st))
        out["md"].append(abs(st.mass - st.problem.mass))
        out["nmin"].append(float(st.density().min()))
        if keep_states:
            states.append(st)

    st = initial
    record(st)
    for i in range(1, n_steps + 1):
        st = step(st, dt)
        st.time = initial.time + i * dt
        if i % checkpoint_every == 0 or i == n_steps:
            record(st)
    return EvolutionTrace(np.array(out["t"]), np.array(out["q1"]), np.array(out["l2"]),
                          np.array(out["md"]), np.array(out["nmin"]), states)


def decay_rate(trace, quantity="q1", window=None):
    """Least-squares exponential rate of a positive decreasing diagnostic.

    Returns (rate, rms residual of the log fit). ``window`` defaults to
    [t_end / 2, t_end].
    """
    t = trace.times
    y = {"q1": trace.q1, "weighted_l2": trace.weighted_l2}[quantity]
    lo, hi = window if window is not None else (t[-1] / 2, t[-1])
    m = (t >= lo) & (t <= hi)
    if np.count_nonzero(m) < 10:
        raise PreconditionError("need at least 10 samples in the fitting window")
    tt, yy = t[m], y[m]
    if np.any(yy <= 0):
        raise PreconditionError(f"{quantity} is not positive on the window")
    if not yy[-1] < yy[0]:
        raise PreconditionError(f"{quantity} is not decreasing on the window")
    c = np.polyfit(tt, np.log(yy), 1)
    res = np.log(yy) - np.polyval(c, tt)
    return float(-c[0]), float(np.sqrt(np.mean(res**2)))


# ---------------------------------------------------------------- initial data

def dilated(problem, delta):
    """Deviation Phi_inf((1 + delta) s) - Phi_inf(s): the steady state rescaled."""
    prof = problem.profile
    x = problem.x
    dev = prof.interpolate_phi((1 + delta) * x) - prof.interpolate_phi(x)
    return problem.perturbed(dev)


def gaussian_mixture(problem, weights, variances):
    """Cumulated density of a mixture of centred Gaussians with the problem's mass."""
    x = problem.x
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    Phi = sum(wi * (1 - np.exp(-x / (2 * v))) for wi, v in zip(w, variances))
    Phi = problem.alpha * Phi / Phi[-1]
    return problem.initial_state(Phi)


def dominated_samples(problem, bound, rng, count, max_tries=10000):
    """Seeded Gaussian-mixture data with k0 <= 2 pi Phi_bound at every node."""
    x = problem.x
    cap = bound.interpolate_phi(x)
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > max_tries:
            raise ConvergenceError("could not draw enough dominated initial data")
        m = int(rng.integers(1, 4))
        w = rng.uniform(0.2, 1.0, size=m)
        v = np.exp(rng.uniform(np.log(0.3), np.log(4.0), size=m))
        st = gaussian_mixture(problem, w, v)
        if np.all(st.phi <= cap):
            out.append(st)
    return out


@dataclass
class ComparisonReport:
    holds: bool
    worst_margin: float
    worst_time: float
    worst_sigma: float
    dominated_initially: bool = True


def comparison_check(states, bound, tol=None):
    """k(t, sigma) <= 2 pi Phi_bound(sigma / pi) at every stored state.

    ``bound`` is the stationary profile of the larger mass M + eps. An
    initial datum that is not dominated is reported (``dominated_initially``
    false, ``holds`` false) rather than raised.
    """
    if not states:
        raise PreconditionError("no states to check")
    x = states[0].problem.x
    cap = 2 * np.pi * bound.interpolate_phi(x)
    M = states[0].problem.mass
    tol = 1e-8 * M if tol is None else tol
    dominated = bool(np.min(cap - states[0].kappa) >= -tol)
    worst, wt, ws = np.inf, 0.0, 0.0
    for st in states:
        # the origin is pinned to zero on both sides
        margin = (cap - st.kappa)[1:]
        i = int(np.argmin(margin)) + 1
        margin = cap - st.kappa
        if margin[i] < worst:
            worst, wt, ws = float(margin[i]), st.time, float(np.pi * x[i])
    return ComparisonReport(dominated and worst >= -tol, worst, wt, ws, dominated)
