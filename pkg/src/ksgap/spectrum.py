"""Eigenvalues of the linearized operator around a stationary profile.

Radial sector: shooting on the cumulated linearized equation

    phi'' + (s + Phi)/(2 s) phi' + (lam + 2 Phi')/(4 s) phi = 0,   phi(0) = 0,

written as a first-order system in (phi, F) with F = phi'/Phi', the radial
profile of the eigenfunction f itself.

k = 1 sector: two-parameter shooting on the coupled system for q = f - h and
h = g c (the first angular components of f and of the induced potential).

Poincare constant: P1 finite elements in s with a lumped weight and inverse
iteration, optionally constrained to be orthogonal to f00 in L^2(n dx).
"""

from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, IntegrationError, PreconditionError
from .grid import cumulative, integrate
from .profile import profile_series, start_point, RTOL, ATOL, solve_stationary

log = logging.getLogger(__name__)

S_MATCH = 60.0     # matching point for the decaying-branch condition
S_TAIL = 40.0      # past this, eigenfunctions are continued by their asymptotics
K1_TAIL = 20.0     # same for k = 1, where the growing branch is exponential in f itself
SCAN_STEP = 0.5
SCAN_START = 0.25
EIG_XTOL = 1e-12


@dataclass
class EigenMode:
    """One eigenpair of the linearized operator.

    ``f`` is the radial profile of the eigenfunction (times cos(theta) when
    ``harmonic`` is 1), ``density`` is n_inf * f and ``phi`` its cumulated form
    phi(s) = (1/2) int_0^s density. Normalized so that int f^2 n dx = 1.
    """

    harmonic: int
    eigenvalue: float
    s: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    residual: float = 0.0
    label: str = "mode"
    index: int = 0

    def sign_changes(self, s_max=S_TAIL, rel=1e-8):
        v = self.phi if self.harmonic == 0 else self.f
        m = self.s <= s_max
        v = v[m]
        v = v[np.abs(v) > rel * np.abs(v).max()]
        return int(np.count_nonzero(np.diff(np.sign(v))))


# ---------------------------------------------------------------- radial sector

def radial_series(a, lam, s):
    """phi = s + b1 s^2 + b2 s^3 and its derivative."""
    c2 = -a * (1 + a) / 4
    b1 = -(2 + 4 * a + lam) / 8
    b2 = -(1.5 * c2 + (1 + a) * b1 + (lam + 2 * a) * b1 / 4) / 6
    return s + b1 * s**2 + b2 * s**3, 1 + 2 * b1 * s + 3 * b2 * s**2


def _radial_rhs(lam):
    def rhs(s, y):
        Phi, w, phi, F = y
        d = np.exp(w)
        return [d, -0.5 - Phi / (2 * s), d * F, -(lam / d + 2) * phi / (4 * s)]
    return rhs


def _radial_start(profile, lam):
    a = profile.slope
    s0 = start_point(a, profile.grid.s0)
    P0, D0 = profile_series(a, s0)
    p0, dp0 = radial_series(a, lam, s0)
    return s0, np.array([P0, np.log(D0), p0, dp0 / D0])


def _shoot(rhs, s0, y0, s_end, t_eval=None, renorm=None, linear=slice(2, None), segment=16.0):
    """Integrate a profile-plus-linear system; optionally rescale the linear part per segment."""
    if t_eval is not None or renorm is None:
        sol = solve_ivp(rhs, (s0, s_end), y0, method="DOP853", t_eval=t_eval,
                        rtol=RTOL, atol=ATOL)
        if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegrationError("shooting integration failed", float(sol.t[-1]))
        return sol
    y = np.array(y0, dtype=float)
    a = s0
    while a < s_end:
        b = min(a + segment, s_end)
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", rtol=RTOL, atol=ATOL)
        if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
            raise IntegrationError("shooting integration failed", float(sol.t[-1]))
        y = sol.y[:, -1].copy()
        if b < s_end:
            # rescaling by a positive factor keeps signs and roots of the mismatch
            y[linear] /= renorm(y)
        a = b
    return y


def radial_mismatch(profile, lam, s_match=S_MATCH):
    """Amplitude of the growing branch at s_match, up to a positive factor.

    On the decaying branch phi ~ -2 s Phi' F / (s + Phi), so the defect
    D = phi + 2 s Phi' F / (s + Phi) vanishes there up to O(Phi'). The
    returned value is lam * D, which also vanishes at the kernel (lam = 0).
    """
    s0, y0 = _radial_start(profile, lam)
    y = _shoot(_radial_rhs(lam), s0, y0, s_match,
               renorm=lambda y: np.hypot(y[2], y[3]))
    Phi, w, phi, F = y
    D = phi + 2 * s_match * np.exp(w) * F / (s_match + Phi)
    return lam * D / np.hypot(phi, F)


def shoot_radial(profile, lam, s_match=S_MATCH, s_tail=S_TAIL):
    """Radial solution phi (leading coefficient 1 at the origin), its F, and the mismatch.

    Past ``s_tail`` the samples follow the decaying branch
    F ~ (s + Phi)^(lam/2), phi = -2 s Phi' F / (s + Phi).
    """
    s = profile.s
    inner = s <= s_tail
    s0, y0 = _radial_start(profile, lam)
    sol = _shoot(_radial_rhs(lam), s0, y0, s[inner][-1], t_eval=s[inner])
    phi = np.empty_like(s)
    F = np.empty_like(s)
    phi[inner], F[inner] = sol.y[2], sol.y[3]
    k = int(np.count_nonzero(inner)) - 1
    outer = ~inner
    Phi, dPhi = profile.phi, profile.dphi
    F[outer] = F[k] * ((s[outer] + Phi[outer]) / (s[k] + Phi[k])) ** (lam / 2)
    phi[outer] = -2 * s[outer] * dPhi[outer] * F[outer] / (s[outer] + Phi[outer])
    return phi, F, radial_mismatch(profile, lam, s_match)


def _find_roots(fun, lam_max, step=SCAN_STEP, start=SCAN_START, count=None):
    roots, residuals = [], []
    lam_lo = start
    g_lo = fun(lam_lo)
    while lam_lo < lam_max - 1e-12:
        lam_hi = min(lam_lo + step, lam_max)
        g_hi = fun(lam_hi)
        if g_lo == 0.0:
            roots.append(lam_lo)
            residuals.append(0.0)
        elif np.sign(g_lo) != np.sign(g_hi) and g_hi != 0.0:
            lam = brentq(fun, lam_lo, lam_hi, xtol=EIG_XTOL, rtol=4 * np.finfo(float).eps)
            roots.append(lam)
            residuals.append(abs(fun(lam)))
        if count is not None and len(roots) >= count:
            break
        lam_lo, g_lo = lam_hi, g_hi
    return roots, residuals


def _normalize(profile, f, weight_factor):
    norm2 = weight_factor * integrate(profile.s, f * f * profile.dphi)
    return 1.0 / np.sqrt(norm2)


def _radial_label(index, lam):
    if index == 0:
        return "kernel"
    if index == 1 and abs(lam - 2) < 1e-4:
        return "dilation"
    return "radial"


def _radial_mode(profile, lam, residual, index):
    if lam == 0.0:
        phi, F = profile.dphi_da.copy(), profile.dF_da.copy()
    else:
        phi, F, _ = shoot_radial(profile, lam)
    c = _normalize(profile, F, 2 * np.pi)
    if F[0] < 0:
        c = -c
    return EigenMode(0, float(lam), profile.s, phi * c, F * c, 2 * profile.dphi * F * c,
                     float(residual), _radial_label(index, lam), index)


def find_radial_eigenvalues(profile, lambda_max=5.0, count=2, include_kernel=True):
    """Kernel mode plus the ``count`` lowest positive radial eigenvalues.

    Positive eigenvalues are the sign changes of the mismatch on a grid of
    step 0.5, refined by Brent's method. If fewer than ``count`` are found
    below ``lambda_max`` the window is doubled once before giving up.
    """
    if count < 0:
        raise PreconditionError("count must be nonnegative")

    def fun(lam):
        return radial_mismatch(profile, lam)

    roots, res = _find_roots(fun, lambda_max, count=count)
    if len(roots) < count:
        roots, res = _find_roots(fun, 2 * lambda_max, count=count)
    if len(roots) < count:
        raise ConvergenceError(
            f"found {len(roots)} radial eigenvalues below {2 * lambda_max}, wanted {count}")
    modes = [_radial_mode(profile, 0.0, 0.0, 0)] if include_kernel else []
    for j, (lam, r) in enumerate(zip(roots[:count], res[:count]), start=1):
        mode = _radial_mode(profile, lam, r, j)
        if mode.sign_changes() != j - 1:
            log.warning("radial mode %d at lambda=%.6g has %d sign changes",
                        j, lam, mode.sign_changes())
        modes.append(mode)
    return modes


# ---------------------------------------------------------------- k = 1 sector

def _k1_rhs(lam):
    # unknowns in s: Phi, w, q, P = 2 s n dq/ds, h, H = dh/dr
    def rhs(s, y):
        Phi, w, q, P, h, H = y
        n = 2 * np.exp(w)
        r = np.sqrt(s)
        return [n / 2, -0.5 - Phi / (2 * s),
                P / (2 * s * n),
                n * q / (2 * s) - lam * n * (q + h) / 2,
                H / (2 * r),
                (-H / r + h / s - n * (q + h)) / (2 * r)]
    return rhs


def _k1_start(profile, lam, A, B):
    a = profile.slope
    s0 = start_point(a, profile.grid.s0)
    P0, D0 = profile_series(a, s0)
    n0, n2 = 2 * a, -a * (1 + a)
    r = np.sqrt(s0)
    A3 = -(2 * n2 * A + lam * n0 * (A + B)) / (8 * n0)
    B3 = -n0 * (A + B) / 8
    n = 2 * D0
    q = A * r + A3 * r**3
    P = r * n * (A + 3 * A3 * r**2)
    h = B * r + B3 * r**3
    H = B + 3 * B3 * r**2
    return s0, np.array([P0, np.log(D0), q, P, h, H])


def _k1_matrix(profile, lam, s_match):
    cols = []
    for A, B in ((1.0, 0.0), (0.0, 1.0)):
        s0, y0 = _k1_start(profile, lam, A, B)
        sol = _shoot(_k1_rhs(lam), s0, y0, s_match)
        Phi, w, q, P, h, H = sol.y[:, -1]
        r = np.sqrt(s_match)
        # growing q-branch shows up in the flux P; growing h-branch in h/r + h'
        cols.append((P, 0.5 * (h / r + H)))
    return np.array(cols).T


def k1_mismatch(profile, lam, s_match=S_MATCH):
    """Determinant of the 2x2 boundary matrix, scaled by the flux row norm."""
    m = _k1_matrix(profile, lam, s_match)
    return (m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]) / np.hypot(m[0, 0], m[0, 1])


def shoot_k1(profile, lam, s_match=S_MATCH, s_tail=K1_TAIL):
    """f = q + h for the k = 1 sector at ``lam``, using the null combination of the basis."""
    m = _k1_matrix(profile, lam, s_match)
    A, B = m[0, 1], -m[0, 0]
    s = profile.s
    inner = s <= s_tail
    s0, y0 = _k1_start(profile, lam, A, B)
    sol = _shoot(_k1_rhs(lam), s0, y0, s[inner][-1], t_eval=s[inner])
    f = np.empty_like(s)
    f[inner] = sol.y[2] + sol.y[4]
    k = int(np.count_nonzero(inner)) - 1
    outer = ~inner
    Phi = profile.phi
    f[outer] = f[k] * ((s[outer] + Phi[outer]) / (s[k] + Phi[k])) ** (lam / 2)
    return f, k1_mismatch(profile, lam, s_match)


def find_k1_eigenvalues(profile, lambda_max=4.0, count=1):
    """Lowest eigenvalues of the k = 1 sector by determinant shooting."""

    def fun(lam):
        return k1_mismatch(profile, lam)

    roots, res = _find_roots(fun, lambda_max, count=count)
    if len(roots) < count:
        roots, res = _find_roots(fun, 2 * lambda_max, count=count)
    if len(roots) < count:
        raise ConvergenceError(
            f"found {len(roots)} k=1 eigenvalues below {2 * lambda_max}, wanted {count}")
    modes = []
    for j, (lam, r) in enumerate(zip(roots[:count], res[:count]), start=1):
        f, _ = shoot_k1(profile, lam)
        c = _normalize(profile, f, np.pi)
        if f[0] < 0:
            c = -c
        f = f * c
        u = 2 * profile.dphi * f
        label = "translation" if j == 1 and abs(lam - 1) < 1e-4 else "k1"
        modes.append(EigenMode(1, float(lam), profile.s, 0.5 * cumulative(profile.s, u),
                               f, u, float(r), label, j))
    return modes


def shift_check(profile, radial_modes, k1_modes):
    """Compare k = 1 eigenvalues with radial eigenvalues minus one.

    Returns a list of (k1 eigenvalue, radial eigenvalue - 1) pairs for the
    positive radial modes. Only the lowest pair (1 and 2 - 1) is expected to
    agree; the higher ones generally do not.
    """
    pos = [m.eigenvalue for m in radial_modes if m.eigenvalue > 0]
    return [(m.eigenvalue, lam - 1) for m, lam in zip(k1_modes, pos)]


# ---------------------------------------------------------------- closed forms

def dilation_residual(profile):
    """Sup relative residual of phi = s Phi' in the radial equation at lam = 2.

    Derivatives of s Phi' are taken from the profile equation itself.
    """
    s, P, d = profile.s, profile.phi, profile.dphi
    d2 = -d * (s + P) / (2 * s)
    d3 = -d2 * (s + P) / (2 * s) - d * (1 + d) / (2 * s) + d * (s + P) / (2 * s * s)
    phi = s * d
    dphi = d + s * d2
    ddphi = 2 * d2 + s * d3
    terms = [ddphi, (s + P) / (2 * s) * dphi, (2 + 2 * d) / (4 * s) * phi]
    res = terms[0] + terms[1] + terms[2]
    scale = np.max(np.abs(terms), axis=0)
    m = scale > 0
    return float(np.max(np.abs(res[m]) / scale[m]))


def translation_residual(profile):
    """Sup relative residual of f = c' - r (density -n') in the k = 1 system at lam = 1."""
    s, P, d = profile.s, profile.phi, profile.dphi
    r = np.sqrt(s)
    n = 2 * d
    d2 = -d * (s + P) / (2 * s)
    dc = -P / r
    ddc = -2 * d + P / s
    dddc = -4 * r * d2 + 2 * d / r - 2 * P / r**3
    q, dq = -r, -np.ones_like(r)
    h, dh, ddh = dc, ddc, dddc
    f = q + h
    dn = 4 * r * d2
    # -(1/(n r)) (r n q')' + q/r^2 = lam f, with q'' = 0
    t1 = [-(dn / n) * dq, -dq / r, q / r**2, -f]
    # -(h'' + h'/r - h/r^2) = n f
    t2 = [-ddh, -dh / r, h / r**2, -n * f]
    out = 0.0
    for t in (t1, t2):
        res = np.sum(t, axis=0)
        scale = np.max(np.abs(t), axis=0)
        out = max(out, float(np.max(np.abs(res) / scale)))
    return out


def kernel_fd_residual(profile, rel_step=1e-4):
    """Residual of phi = dPhi/da (central differences in a) in the radial equation at lam = 0."""
    from .profile import _integrate_with_variation
    a, g = profile.slope, profile.grid
    h = rel_step * a
    yp = _integrate_with_variation(a + h, g)
    ym = _integrate_with_variation(a - h, g)
    s = profile.s

    def parts(y):
        P, w = y[0], y[1]
        d = np.exp(w)
        return P, d, -d * (s + P) / (2 * s)

    Pp, dp, ddp = parts(yp)
    Pm, dm, ddm = parts(ym)
    phi = (Pp - Pm) / (2 * h)
    dphi = (dp - dm) / (2 * h)
    ddphi = (ddp - ddm) / (2 * h)
    P, d = profile.phi, profile.dphi
    terms = [ddphi, (s + P) / (2 * s) * dphi, 2 * d / (4 * s) * phi]
    res = np.sum(terms, axis=0)
    scale = np.max(np.abs(terms))
    m = s <= S_TAIL
    return float(np.max(np.abs(res[m])) / scale), phi


# ---------------------------------------------------------------- scans

@dataclass
class SpectralScan:
    masses: list
    radial: list
    k1: list
    residuals: list
    failures: dict = field(default_factory=dict)

    def rows(self):
        """(mass, k, index, lambda, residual) rows in mass order."""
        out = []
        for M, rad, k1, res in zip(self.masses, self.radial, self.k1, self.residuals):
            if rad is None:
                continue
            for j, lam in enumerate(rad, start=1):
                out.append((M, 0, j, lam, res[0][j - 1]))
            for j, lam in enumerate(k1, start=1):
                out.append((M, 1, j, lam, res[1][j - 1]))
        return out

    @property
    def success_fraction(self):
        return 1 - len(self.failures) / max(len(self.masses), 1)


def _scan_one(args):
    M, count_radial, count_k1, grid = args
    prof = solve_stationary(M, grid)
    rad = find_radial_eigenvalues(prof, count=count_radial, include_kernel=False,
                                  lambda_max=2.0 * count_radial + 1.0)
    k1 = find_k1_eigenvalues(prof, count=count_k1, lambda_max=2.0 * count_k1)
    return ([m.eigenvalue for m in rad], [m.eigenvalue for m in k1],
            ([m.residual for m in rad], [m.residual for m in k1]))


def scan_masses(masses, count_radial=1, count_k1=1, grid=None, workers=1):
    """Lowest eigenvalues in both sectors for each mass; failures are recorded, not raised."""
    masses = [float(m) for m in masses]
    jobs = [(M, count_radial, count_k1, grid) for M in masses]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as ex:
            futures = [ex.submit(_scan_one, j) for j in jobs]
            results = []
            for fu in futures:
                try:
                    results.append(fu.result())
                except Exception as exc:  # noqa: BLE001 - recorded per mass
                    results.append(exc)
    else:
        results = []
        for j in jobs:
            try:
                results.append(_scan_one(j))
            except Exception as exc:  # noqa: BLE001
                results.append(exc)
    scan = SpectralScan(masses, [], [], [], {})
    for M, res in zip(masses, results):
        if isinstance(res, Exception):
            scan.failures[M] = f"{type(res).__name__}: {res}"
            scan.radial.append(None)
            scan.k1.append(None)
            scan.residuals.append(None)
        else:
            scan.radial.append(res[0])
            scan.k1.append(res[1])
            scan.residuals.append(res[2])
    return scan


# ---------------------------------------------------------------- Poincare constant

@dataclass
class PoincareResult:
    value: float
    harmonic: int
    constrained: bool
    nodes: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    orthogonality: float = 0.0
    iterations: int = 0


def _fem_matrices(profile, harmonic):
    x = np.concatenate([[0.0], profile.s])
    d = np.diff(x)
    n = np.concatenate([[2 * profile.slope], 2 * profile.dphi])
    k = 2 * (x[:-1] + x[1:]) / d
    N = x.size
    main = np.zeros(N)
    main[:-1] += k
    main[1:] += k
    off = -k
    if harmonic == 1:
        # int h^2 / s on each element by 3-point Gauss; the first element is exact
        g, wg = np.polynomial.legendre.leggauss(3)
        xa, xb = x[:-1, None], x[1:, None]
        t = 0.5 * (g + 1)
        sq = xa + t * (xb - xa)
        N0, N1 = 1 - t, t
        jac = 0.5 * d[:, None] * wg
        with np.errstate(divide="ignore", invalid="ignore"):
            m00 = np.sum(jac * N0 * N0 / sq, axis=1)
            m01 = np.sum(jac * N0 * N1 / sq, axis=1)
            m11 = np.sum(jac * N1 * N1 / sq, axis=1)
        m00[0], m01[0], m11[0] = 0.0, 0.0, 0.5
        main[:-1] += m00
        main[1:] += m11
        off = off + m01
    K = sparse.diags([off, main, off], [-1, 0, 1], format="csc")
    W = n * 0.5 * (np.concatenate([d, [0.0]]) + np.concatenate([[0.0], d]))
    return x, K, W


def poincare_mode(profile, harmonic=0, constrained=True, tol=1e-11, maxiter=5000, check=True):
    """Lowest eigenpair of  int |grad h|^2 = Lam int h^2 n  in one angular sector.

    For k = 0 with ``constrained`` the search is restricted to h orthogonal
    to f00 n (bordered system). For k = 1 the Dirichlet condition h(0) = 0 is
    imposed and no constraint applies. With ``check`` a constrained value
    not above 1 raises instead of being returned.
    """
    if harmonic not in (0, 1):
        raise PreconditionError("harmonic must be 0 or 1")
    x, K, W = _fem_matrices(profile, harmonic)
    N = x.size
    if harmonic == 1:
        K = K[1:, 1:]
        Wv = W[1:]
    else:
        Wv = W
    m = Wv.size
    use_border = harmonic == 0 and constrained
    if use_border:
        f00 = np.concatenate([[1.0 / (profile.slope * profile.dmass_da)], profile.f00])
        v = Wv * f00
        v = v / np.linalg.norm(v)
        B = sparse.bmat([[K, sparse.csc_matrix(v[:, None])],
                         [sparse.csc_matrix(v[None, :]), None]], format="csc")
        lu = splu(B)

        def apply(y):
            return lu.solve(np.concatenate([Wv * y, [0.0]]))[:m]
    else:
        shift = 1.0 if harmonic == 0 else 0.0
        lu = splu((K + shift * sparse.diags(Wv)).tocsc())

        def apply(y):
            return lu.solve(Wv * y)

    def rq(y):
        return float(y @ (K @ y)) / float(y @ (Wv * y))

    y = np.ones(m) if harmonic == 0 else np.sqrt(np.concatenate([x[1:]]))
    y = apply(y)
    lam_old = np.inf
    for it in range(1, maxiter + 1):
        y = y / np.sqrt(y @ (Wv * y))
        y = apply(y)
        lam = rq(y)
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
            break
        lam_old = lam
    else:
        raise ConvergenceError("inverse iteration did not converge")
    y = y / np.sqrt(y @ (Wv * y))
    orth = 0.0
    if use_border:
        orth = float(abs(np.dot(y, v)))
    if harmonic == 1:
        y = np.concatenate([[0.0], y])
    if check and harmonic == 0 and constrained and lam <= 1 + np.finfo(float).eps:
        raise ConvergenceError(f"constrained Poincare constant {lam} <= 1: grid inadequate")
    return PoincareResult(lam, harmonic, constrained, x, y, orth, it)


def poincare_constant(profile, harmonic=0, constrained=True):
    """Best constant Lam in Lam int h^2 n <= int |grad h|^2 for one sector."""
    return poincare_mode(profile, harmonic, constrained).value


def overall_poincare_constant(profile):
    """Minimum over the constrained radial sector and the k = 1 sector."""
    return min(poincare_constant(profile, 0, True), poincare_constant(profile, 1))


def closed_form_agreement(profile, s_max=K1_TAIL):
    """Sup relative distance between shooting solutions and the closed-form eigenfunctions.

    Returns a dict with keys ``dilation`` (lam = 2 against s Phi'), ``kernel``
    (lam = 0 against dPhi/da) and ``translation`` (k = 1, lam = 1 against
    f = c' - r, whose density is -n').
    """
    s, P, d = profile.s, profile.phi, profile.dphi
    m = s <= s_max

    def dist(u, v):
        u, v = u[m], v[m]
        c = np.dot(u, v) / np.dot(v, v)
        return float(np.max(np.abs(u - c * v)) / np.max(np.abs(u)))

    phi2, _, _ = shoot_radial(profile, 2.0)
    phi0, _, _ = shoot_radial(profile, 0.0)
    f1, _ = shoot_k1(profile, 1.0)
    r = np.sqrt(s)
    return {
        "dilation": dist(s * d, phi2),
        "kernel": dist(profile.dphi_da, phi0),
        "translation": dist(-P / r - r, f1),
    }
