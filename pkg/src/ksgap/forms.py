"""Quadratic forms of the linearized problem for radial perturbations.

A radial perturbation is described by f (the relative density perturbation,
n = n_inf (1 + f)) and by its cumulated form phi(s) = int_0^s Phi' f, so that
phi' = Phi' f. In these variables

    Q1[f]  = 2 pi int Phi' f^2 ds - pi int phi^2 / s ds       (zero mass),
    Q2[f]  = pi int (2 s f' + phi)^2 / s * 2 Phi' ds,
    <f,f'> = 2 pi int Phi' f f' ds - pi int phi phi' / s ds,

where the second term of Q1 is the Dirichlet energy of the induced potential.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .grid import cumulative, integrate

ORTHO_TOL = 1e-8


@dataclass
class Perturbation:
    """Radial perturbation sampled on the profile grid."""

    f: np.ndarray
    df: np.ndarray
    phi: np.ndarray
    zero_mass: bool = False
    orthogonal_to_kernel: bool = False
    label: str = field(default="", compare=False)


def _flags(profile, f, phi):
    scale = np.sqrt(2 * np.pi * integrate(profile.s, profile.dphi * f * f))
    mass = 2 * np.pi * phi[-1]
    kern = 2 * np.pi * integrate(profile.s, profile.dphi * f * profile.f00)
    tol = ORTHO_TOL * max(scale, np.finfo(float).tiny)
    return abs(mass) <= tol, abs(kern) <= tol


def from_f(profile, f, df, label=""):
    """Perturbation from samples of f and df/ds; phi is built by quadrature."""
    f = np.asarray(f, dtype=float)
    df = np.asarray(df, dtype=float)
    phi = cumulative(profile.s, profile.dphi * f)
    zm, ok = _flags(profile, f, phi)
    return Perturbation(f, df, phi, zm, ok, label)


def from_mode(profile, mode):
    """Perturbation from a radial eigenmode, with f' taken from the eigen-equation.

    On the cumulated equation F' = -(lam + 2 Phi') phi / (4 s Phi').
    """
    if mode.harmonic != 0:
        raise PreconditionError("only radial modes define radial perturbations")
    lam = mode.eigenvalue
    s, d = profile.s, profile.dphi
    df = -(lam / d + 2) * mode.phi / (4 * s)
    pert = from_f(profile, mode.f, df, mode.label)
    pert.phi = mode.phi.copy()
    pert.zero_mass, pert.orthogonal_to_kernel = _flags(profile, mode.f, pert.phi)
    return pert


def dilation(profile):
    """f = D log n_inf direction, phi = s Phi' (eigenfunction for lam = 2)."""
    s, P, d = profile.s, profile.phi, profile.dphi
    f = 1 - (s + P) / 2
    df = -(1 + d) / 2
    pert = from_f(profile, f, df, "dilation")
    pert.phi = s * d
    pert.zero_mass, pert.orthogonal_to_kernel = _flags(profile, f, pert.phi)
    return pert


def kernel(profile):
    """f = f00, phi = dPhi/dM. Carries unit mass, so only Q2 applies."""
    phi = profile.dphi_da / profile.dmass_da
    pert = Perturbation(profile.f00.copy(), -phi / (2 * profile.s), phi, False, False, "kernel")
    return pert


def constant(profile):
    return from_f(profile, np.ones_like(profile.s), np.zeros_like(profile.s), "constant")


def l2_weighted(profile, pert):
    """int f^2 n_inf dx."""
    return 2 * np.pi * integrate(profile.s, profile.dphi * pert.f**2)


def inner_weighted(profile, a, b):
    """int f_a f_b n_inf dx."""
    return 2 * np.pi * integrate(profile.s, profile.dphi * a.f * b.f)


def q1(profile, pert):
    """Linearized free energy. Requires a zero-mass perturbation."""
    if not pert.zero_mass:
        raise PreconditionError("Q1 needs a zero-mass perturbation (int f n_inf dx = 0)")
    return l2_weighted(profile, pert) - np.pi * integrate(profile.s, pert.phi**2 / profile.s)


def q2(profile, pert):
    """Linearized entropy production."""
    s = profile.s
    g = 2 * s * pert.df + pert.phi
    return np.pi * integrate(s, g * g / s * 2 * profile.dphi)


def scalar_product(profile, a, b):
    """Bilinear form behind Q1; at least one argument must carry zero mass."""
    if not (a.zero_mass or b.zero_mass):
        raise PreconditionError(
            "scalar product needs a zero-mass argument for the potential term to be finite")
    return inner_weighted(profile, a, b) - np.pi * integrate(profile.s, a.phi * b.phi / profile.s)


def project(profile, pert, kernel_too=True):
    """Remove the components along 1 and f00 in L^2(n_inf dx) (Gram-Schmidt)."""
    basis = [constant(profile)]
    if kernel_too:
        basis.append(kernel(profile))
    G = np.array([[inner_weighted(profile, u, v) for v in basis] for u in basis])
    rhs = np.array([inner_weighted(profile, u, pert) for u in basis])
    c = np.linalg.solve(G, rhs)
    f, df = pert.f.copy(), pert.df.copy()
    for ci, u in zip(c, basis):
        f -= ci * u.f
        df -= ci * u.df
    # rebuild phi with the same quadrature as the inner products
    return from_f(profile, f, df, pert.label)


def random_bumps(profile, rng, n_bumps=3, s_range=(0.0, 12.0)):
    """Smooth radial perturbation: a quadratic in s plus Gaussian bumps in s."""
    s = profile.s
    c = rng.normal(size=3) * np.array([1.0, 0.3, 0.03])
    f = c[0] + c[1] * s + c[2] * s**2
    df = c[1] + 2 * c[2] * s
    for _ in range(n_bumps):
        amp = rng.normal()
        mu = rng.uniform(*s_range)
        w = rng.uniform(0.3, 4.0)
        g = amp * np.exp(-((s - mu) ** 2) / (2 * w * w))
        f = f + g
        df = df - g * (s - mu) / (w * w)
    return from_f(profile, f, df, "random")


@dataclass
class FormsReport:
    mass: float
    q1: float
    q2: float
    l2_weighted: float
    lambda_used: float
    margins: dict

    @property
    def ratio(self):
        return self.q2 / self.q1 if self.q1 != 0 else np.inf

    @property
    def eps(self):
        return 1e-8 * (abs(self.q1) + abs(self.q2))

    @property
    def conditions(self):
        return {k: v >= -self.eps for k, v in self.margins.items()}

    @property
    def passed(self):
        return all(self.conditions.values())

    def as_dict(self):
        out = {"mass": self.mass, "q1": self.q1, "q2": self.q2, "ratio": self.ratio,
               "l2w": self.l2_weighted, "lambda_used": self.lambda_used}
        for k, v in self.margins.items():
            out[f"margin_{k}"] = v
        out["pass"] = self.passed
        return out


def check_inequalities(profile, pert, Lambda):
    """Margins of Q1 >= 0, Q1 <= Q2, 2 Q1 <= Q2 and int f^2 n <= Lam/(Lam-1) Q1.

    A margin is the slack of the inequality; it passes when it is at least
    -1e-8 (|Q1| + |Q2|).
    """
    a = q1(profile, pert)
    b = q2(profile, pert)
    l2 = l2_weighted(profile, pert)
    margins = {
        "q1_nonneg": a,
        "gap": b - a,
        "radial_gap": b - 2 * a,
        "poincare": Lambda / (Lambda - 1) * a - l2 if Lambda != 1 else -np.inf,
    }
    return FormsReport(profile.mass, a, b, l2, Lambda, margins)


def gradient_bound_constants(eps):
    """Constants of the explicit L^inf gradient bound, for eps in (0, 1)."""
    if not 0 < eps < 1:
        raise PreconditionError("eps must lie in (0, 1)")
    c1 = (2 * np.pi * (1 + eps) / eps) ** ((1 + eps) / (2 + eps)) / (2 * np.pi)
    c2 = (2 * np.pi * (1 - eps) / eps) ** ((1 - eps) / (2 - eps)) / (2 * np.pi)
    return c1, c2, max(c1, c2)
