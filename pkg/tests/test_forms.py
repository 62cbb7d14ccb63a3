import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksgap import forms, spectrum
from ksgap.errors import PreconditionError
from ksgap.grid import integrate


def _compact_test_phi(p, S=4.0):
    s = p.s
    inside = s < S
    phi = np.where(inside, s**2 * (S - s) ** 4, 0.0)
    dphi = np.where(inside, 2 * s * (S - s) ** 4 - 4 * s**2 * (S - s) ** 3, 0.0)
    return phi, dphi


def _fft_terms(p, S=4.0, N=1024, L=6.0):
    """int f^2 n and int |grad g|^2 with -Lap g = f n, by brute force on a 2D box.

    A radial zero-mass source has a potential vanishing outside its support,
    so the periodic Poisson solution on a box containing it is exact.
    """
    h = 2 * L / N
    x = (np.arange(N) - N // 2) * h
    R2 = x[:, None] ** 2 + x[None, :] ** 2
    inside = R2 < S
    u = np.where(inside, 2 * (2 * R2 * (S - R2) ** 4 - 4 * R2**2 * (S - R2) ** 3), 0.0)
    n = 2 * p.interpolate_dphi(np.minimum(R2, p.grid.s_max))
    t1 = np.sum(np.where(inside, u**2 / n, 0.0)) * h * h
    uh = np.fft.fft2(u) * h * h
    k = 2 * np.pi * np.fft.fftfreq(N, d=h)
    K2 = k[:, None] ** 2 + k[None, :] ** 2
    K2[0, 0] = np.inf
    return t1, float(np.sum(np.abs(uh) ** 2 / K2)) / (2 * L) ** 2


def test_q1_against_2d_brute_force(tiny):
    phi, dphi = _compact_test_phi(tiny)
    pert = forms.Perturbation(dphi / tiny.dphi, np.zeros_like(phi), phi, True, False)
    t1, t2 = _fft_terms(tiny)
    assert forms.q1(tiny, pert) == pytest.approx(t1 - t2, rel=1e-4)
    # the potential term on its own, since the first dominates at small mass
    assert np.pi * integrate(tiny.s, phi**2 / tiny.s) == pytest.approx(t2, rel=1e-4)


def test_zero_perturbation(unit):
    z = forms.from_f(unit, np.zeros_like(unit.s), np.zeros_like(unit.s))
    assert z.zero_mass and z.orthogonal_to_kernel
    assert forms.q1(unit, z) == 0.0 and forms.q2(unit, z) == 0.0


@pytest.mark.parametrize("mass", [1e-3, 1.0, 4 * np.pi, 7 * np.pi])
def test_dilation_mode(profiles, mass):
    p = profiles(mass)
    d = forms.dilation(p)
    assert d.zero_mass
    a, b = forms.q1(p, d), forms.q2(p, d)
    assert a > 0
    assert b / a == pytest.approx(2.0, abs=1e-4)


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi, 7 * np.pi])
def test_kernel_mode_has_no_entropy_production(profiles, mass):
    p = profiles(mass)
    k = forms.kernel(p)
    scale = forms.l2_weighted(p, k)
    assert abs(forms.q2(p, k)) <= 1e-8 * scale
    with pytest.raises(PreconditionError):
        forms.q1(p, k)


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi])
def test_rayleigh_quotients_of_modes(profiles, mass):
    p = profiles(mass)
    for mode in spectrum.find_radial_eigenvalues(p, count=2, include_kernel=False):
        pert = forms.from_mode(p, mode)
        assert forms.q2(p, pert) / forms.q1(p, pert) == pytest.approx(mode.eigenvalue, rel=1e-6)


def test_from_mode_rejects_k1(unit):
    (mode,) = spectrum.find_k1_eigenvalues(unit)
    with pytest.raises(PreconditionError):
        forms.from_mode(unit, mode)


def test_scalar_product_properties(mid):
    rng = np.random.default_rng(3)
    a = forms.project(mid, forms.random_bumps(mid, rng))
    b = forms.project(mid, forms.random_bumps(mid, rng))
    assert forms.scalar_product(mid, a, a) == forms.q1(mid, a)
    ab, ba = forms.scalar_product(mid, a, b), forms.scalar_product(mid, b, a)
    assert ab == pytest.approx(ba, rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi, 7 * np.pi])
def test_zero_mass_is_orthogonal_to_kernel_in_scalar_product(profiles, mass):
    p = profiles(mass)
    rng = np.random.default_rng(11)
    a = forms.project(p, forms.random_bumps(p, rng), kernel_too=False)
    assert a.zero_mass
    k = forms.kernel(p)
    scale = np.sqrt(forms.l2_weighted(p, a) * forms.l2_weighted(p, k))
    assert abs(forms.scalar_product(p, a, k)) <= 1e-7 * scale


def test_scalar_product_needs_zero_mass(unit):
    c = forms.constant(unit)
    with pytest.raises(PreconditionError):
        forms.scalar_product(unit, c, c)


def test_projection_sets_flags(mid):
    pert = forms.project(mid, forms.random_bumps(mid, np.random.default_rng(0)))
    assert pert.zero_mass and pert.orthogonal_to_kernel


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi])
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_gap_inequalities_random(profiles, mass, seed):
    p = profiles(mass)
    lam = _lambda(p)
    pert = forms.project(p, forms.random_bumps(p, np.random.default_rng(seed)))
    rep = forms.check_inequalities(p, pert, lam)
    assert rep.passed, rep.as_dict()
    assert rep.ratio >= 2 - 1e-8


_LAMBDA = {}


def _lambda(p):
    if p.mass not in _LAMBDA:
        _LAMBDA[p.mass] = spectrum.poincare_constant(p, 0, True)
    return _LAMBDA[p.mass]


def test_dilation_saturates_radial_gap(mid):
    d = forms.dilation(mid)
    rep = forms.check_inequalities(mid, d, _lambda(mid))
    assert abs(rep.margins["radial_gap"]) <= 1e-4 * rep.q2


def test_report_fields(unit):
    pert = forms.project(unit, forms.random_bumps(unit, np.random.default_rng(1)))
    rep = forms.check_inequalities(unit, pert, 2.0)
    d = rep.as_dict()
    assert set(d) >= {"q1", "q2", "ratio", "margin_gap", "pass"}
    assert rep.eps == pytest.approx(1e-8 * (abs(rep.q1) + abs(rep.q2)))


class TestConstants:
    def test_half(self):
        c1, c2, cmax = forms.gradient_bound_constants(0.5)
        assert c1 == pytest.approx((6 * np.pi) ** 0.6 / (2 * np.pi), rel=1e-15)
        assert c2 == pytest.approx((2 * np.pi) ** (1 / 3) / (2 * np.pi), rel=1e-15)
        assert cmax == max(c1, c2)

    def test_positive_on_scan(self):
        for eps in np.linspace(0.01, 0.99, 99):
            c1, c2, _ = forms.gradient_bound_constants(eps)
            assert c1 > 0 and c2 > 0 and np.isfinite(c1) and np.isfinite(c2)

    def test_near_one_is_finite(self):
        _, c2, _ = forms.gradient_bound_constants(1 - 1e-12)
        assert np.isfinite(c2) and c2 > 0

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.2, 1.5])
    def test_out_of_range(self, eps):
        with pytest.raises(PreconditionError):
            forms.gradient_bound_constants(eps)
