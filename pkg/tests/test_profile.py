import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksgap import RadialGrid, integrate_phi, mass_of, solve_stationary
from ksgap.errors import PreconditionError
from ksgap.grid import integrate
from ksgap.profile import (
    CRITICAL_MASS, find_slope, kernel_mode, kernel_potential, kernel_residual, mu0,
    mu0_prime_from_potential, profile_residual, profile_series,
)

EULER_GAMMA = 0.5772156649015329


def _series_residual(a, s):
    c2 = -a * (1 + a) / 4
    c3 = -c2 * (2 + 3 * a) / 12
    P, D = profile_series(a, s)
    return 2 * c2 + 6 * c3 * s + D / 2 + P * D / (2 * s)


@pytest.mark.parametrize("a", [1e-4, 0.3, 2.0])
def test_series_residual_is_second_order(a):
    r1, r2 = _series_residual(a, 1e-3), _series_residual(a, 1e-4)
    assert abs(r2) < 2e-2 * abs(r1) + 1e-15


def test_linear_regime_small_slope():
    a = 1e-4
    g = RadialGrid.geometric()
    phi, dphi = integrate_phi(a, g)
    lin = 2 * a * (1 - np.exp(-g.s / 2))
    assert phi[0] > 0 and phi[0] < 2 * a * g.s0
    assert np.max(np.abs(phi / lin - 1)) < 5 * a
    M, tail = mass_of(a)
    assert M / a == pytest.approx(4 * np.pi, rel=5 * a)
    assert tail < 1e-10


def test_mass_is_increasing_and_subcritical():
    slopes = np.geomspace(1e-3, 1e3, 25)
    masses = np.array([mass_of(a)[0] for a in slopes])
    assert np.all(np.diff(masses) > 0)
    assert masses.max() < CRITICAL_MASS


def test_mass_of_rejects_short_domain():
    with pytest.raises(PreconditionError):
        mass_of(1.0, s_max=5.0)


@pytest.mark.parametrize("mass", [0.0, -1.0, CRITICAL_MASS, 30.0])
def test_supercritical_or_nonpositive_mass_rejected(mass):
    with pytest.raises(PreconditionError, match="8"):
        find_slope(mass)


def test_small_mass_gaussian(tiny):
    M = tiny.mass
    gauss = M / (2 * np.pi) * np.exp(-tiny.s / 2)
    assert np.max(np.abs(tiny.n_inf / gauss - 1)) < 1e-3
    assert tiny.slope == pytest.approx(M / (4 * np.pi), rel=1e-3)
    assert tiny.n_inf[0] == pytest.approx(M / (2 * np.pi), rel=1e-3)


def test_potential_at_origin_small_mass(tiny):
    # (1/2pi) int log(1/|y|) n dy on the Gaussian: (M / 4pi)(gamma - log 2)
    M = tiny.mass
    c0 = M / (4 * np.pi) * (EULER_GAMMA - np.log(2))
    assert tiny.c_inf[0] == pytest.approx(c0, rel=2e-3)


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi, 7 * np.pi])
def test_profile_properties(profiles, mass):
    p = profiles(mass)
    assert 2 * np.pi * p.phi[-1] == pytest.approx(mass, abs=1e-9)
    assert np.all(p.dphi > 0)
    assert profile_residual(p) < 1e-9
    # -r c'(r) = Phi(r^2), i.e. dc/ds = -Phi / (2 s)
    dc = np.gradient(p.c_inf, p.s)
    m = (p.s > 1e-2) & (p.s < 50)
    np.testing.assert_allclose(dc[m], -p.phi[m] / (2 * p.s[m]), rtol=2e-3, atol=1e-6)
    # c + alpha log r tends to a constant
    tail = p.c_inf + p.alpha * np.log(p.r)
    assert abs(tail[-1] - tail[-200]) < 1e-10


def test_tail_exponent(mid):
    # n r^alpha e^{r^2/2} flattens out with alpha = M / 2 pi = 2
    s = mid.s
    w = np.log(mid.n_inf) + mid.alpha * np.log(np.sqrt(s)) + s / 2
    m = (s > 100) & (s < 300)
    slope = np.polyfit(np.log(s[m]), w[m], 1)[0]
    assert abs(slope) < 0.05
    assert mid.alpha == pytest.approx(2.0)


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi, 7 * np.pi])
def test_mu0_prime_matches_finite_difference(profiles, mass):
    p = profiles(mass)
    h = 1e-5 * mass
    fd = (mu0(solve_stationary(mass + h)) - mu0(solve_stationary(mass - h))) / (2 * h)
    assert p.mu0_prime == pytest.approx(fd, rel=1e-7, abs=1e-9)
    assert mu0_prime_from_potential(p) == pytest.approx(p.mu0_prime, rel=1e-7, abs=1e-9)


@pytest.mark.parametrize("mass", [1e-3, 1.0, 4 * np.pi, 7 * np.pi])
def test_kernel_mode(profiles, mass):
    p = profiles(mass)
    assert kernel_residual(p) < 1e-6
    f00, mu = kernel_mode(p)
    # f00 = mu0' + G*(f00 n)
    np.testing.assert_allclose(f00 - kernel_potential(p), mu, rtol=1e-7, atol=1e-7 * abs(mu))
    # f00 = d log n / dM, so int f00 n dx = 1
    assert 2 * np.pi * integrate(p.s, p.dphi * f00) == pytest.approx(1.0, rel=1e-8)


def test_kernel_mode_small_mass_shape(tiny):
    # d/dM of the Gaussian limit: f00 -> 1/M
    f = tiny.f00[tiny.s < 20]
    assert np.max(np.abs(f * tiny.mass - 1)) < 5e-3


def test_interpolation(mid):
    s = np.array([0.0, 1e-8, 0.5, 3.3, 1e3])
    v = mid.interpolate_phi(s)
    assert v[0] == 0 and v[-1] == mid.alpha
    exact_phi, exact_dphi = integrate_phi(mid.slope, RadialGrid.from_nodes([1e-6, 0.5, 3.3, 10.0]))
    np.testing.assert_allclose(v[2:4], exact_phi[1:3], rtol=1e-9)
    np.testing.assert_allclose(mid.interpolate_dphi(s[2:4]), exact_dphi[1:3], rtol=1e-9)


@settings(max_examples=15, deadline=None)
@given(a=st.floats(1e-3, 50.0))
def test_cumulated_density_is_concave_and_bounded(a):
    g = RadialGrid.geometric(s_max=200.0)
    phi, dphi = integrate_phi(a, g)
    assert np.all(np.diff(dphi) < 0)
    # far out Phi is flat; dense output adds rounding noise of about ten ulps
    assert np.all(np.diff(phi) >= -32 * np.finfo(float).eps * phi[-1])
    assert np.all(np.diff(phi[g.s < 30]) > 0)
    assert 2 * np.pi * phi[-1] < CRITICAL_MASS
