import numpy as np
import pytest
from scipy.optimize import brentq

from ksgap import RadialGrid, solve_stationary
from ksgap import spectrum
from ksgap.errors import ConvergenceError, PreconditionError
from ksgap.verify import ou_radial_eigenvalues

MASSES = [1.0, 2 * np.pi, 4 * np.pi, 7 * np.pi]


def _cos(u, v):
    return abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))


@pytest.mark.parametrize("mass", MASSES)
def test_mismatch_brackets_two(profiles, mass):
    p = profiles(mass)
    assert spectrum.radial_mismatch(p, 1.5) * spectrum.radial_mismatch(p, 2.5) < 0


@pytest.mark.parametrize("mass", [0.1, 1.0, 4 * np.pi, 7 * np.pi])
def test_lowest_radial_eigenvalue_is_two(profiles, mass):
    modes = spectrum.find_radial_eigenvalues(profiles(mass), count=1)
    kernel, dil = modes
    assert kernel.eigenvalue == 0.0 and kernel.label == "kernel"
    assert dil.eigenvalue == pytest.approx(2.0, abs=1e-6)
    assert dil.label == "dilation" and dil.sign_changes() == 0


@pytest.mark.parametrize("mass", [1.0, 7 * np.pi])
def test_kernel_is_a_root(profiles, mass):
    p = profiles(mass)
    root = brentq(lambda lam: spectrum.radial_mismatch(p, lam), -0.1, 0.1, xtol=1e-12)
    assert abs(root) < 1e-10
    phi, _, _ = spectrum.shoot_radial(p, 0.0)
    m = p.s <= spectrum.S_TAIL
    assert _cos(phi[m], p.dphi_da[m]) >= 1 - 1e-8


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi, 7 * np.pi])
def test_k1_lowest_is_translation(profiles, mass):
    p = profiles(mass)
    (mode,) = spectrum.find_k1_eigenvalues(p)
    assert mode.eigenvalue == pytest.approx(1.0, abs=1e-6)
    assert mode.label == "translation"
    m = p.s <= spectrum.K1_TAIL
    dn = -np.gradient(p.n_inf, p.r)  # -n_inf'(r)
    assert _cos(mode.density[m], dn[m]) >= 1 - 1e-6


def test_overall_gap_is_one(mid):
    rad = spectrum.find_radial_eigenvalues(mid, count=1, include_kernel=False)
    k1 = spectrum.find_k1_eigenvalues(mid)
    assert min(rad[0].eigenvalue, k1[0].eigenvalue) == pytest.approx(1.0, abs=1e-6)


def test_shift_holds_only_for_the_lowest_pair(mid):
    rad = spectrum.find_radial_eigenvalues(mid, count=2, include_kernel=False)
    k1 = spectrum.find_k1_eigenvalues(mid, count=2)
    pairs = spectrum.shift_check(mid, rad, k1)
    assert pairs[0][0] == pytest.approx(pairs[0][1], abs=1e-6)
    assert abs(pairs[1][0] - pairs[1][1]) > 1e-2


def test_second_mode_has_one_node(unit):
    modes = spectrum.find_radial_eigenvalues(unit, count=2, include_kernel=False)
    assert modes[1].sign_changes() == 1
    assert modes[1].eigenvalue > modes[0].eigenvalue


def test_small_mass_against_dense_oracle(tiny):
    oracle = ou_radial_eigenvalues(2)
    np.testing.assert_allclose(oracle, [2.0, 4.0], atol=5e-4)
    modes = spectrum.find_radial_eigenvalues(tiny, count=2, include_kernel=False)
    np.testing.assert_allclose([m.eigenvalue for m in modes], oracle, atol=1e-3)


def test_modes_are_normalized(unit):
    for m in spectrum.find_radial_eigenvalues(unit, count=1, include_kernel=False):
        assert 2 * np.pi * np.trapezoid(m.f**2 * unit.dphi, unit.s) == pytest.approx(1.0, rel=1e-3)


@pytest.mark.parametrize("mass", [1.0, 4 * np.pi, 7 * np.pi])
def test_closed_form_residuals(profiles, mass):
    p = profiles(mass)
    assert spectrum.dilation_residual(p) <= 1e-6
    assert spectrum.translation_residual(p) <= 1e-6
    assert spectrum.kernel_fd_residual(p)[0] <= 1e-6
    assert max(spectrum.closed_form_agreement(p).values()) <= 1e-6


def test_negative_count_rejected(unit):
    with pytest.raises(PreconditionError):
        spectrum.find_radial_eigenvalues(unit, count=-1)


def test_unreachable_count_raises(unit):
    with pytest.raises(ConvergenceError):
        spectrum.find_radial_eigenvalues(unit, count=3, lambda_max=1.0)


def test_empty_scan():
    scan = spectrum.scan_masses([])
    assert scan.rows() == [] and scan.success_fraction == 1.0


def test_scan_records_failures():
    scan = spectrum.scan_masses([1.0, 30.0])
    assert 30.0 in scan.failures and scan.success_fraction == 0.5
    assert [r[:3] for r in scan.rows()] == [(1.0, 0, 1), (1.0, 1, 1)]


def test_scan_is_stable_under_refinement():
    g = RadialGrid.geometric()
    a = spectrum.scan_masses([3.0, 20.0], grid=g)
    b = spectrum.scan_masses([3.0, 20.0], grid=g.refined())
    for ra, rb in zip(a.rows(), b.rows()):
        assert ra[3] == pytest.approx(rb[3], abs=1e-8)


def test_parallel_scan_matches_serial():
    a = spectrum.scan_masses([2.0, 9.0], workers=1)
    b = spectrum.scan_masses([2.0, 9.0], workers=2)
    assert a.rows() == b.rows()


class TestPoincare:
    def test_unconstrained_ground_state_is_kernel_direction(self, unit):
        # the constant has zero Dirichlet energy, so the unconstrained k=0 bottom is 0
        res = spectrum.poincare_mode(unit, 0, constrained=False)
        assert abs(res.value) < 1e-6

    @pytest.mark.parametrize("mass", [1.0, 4 * np.pi])
    def test_constrained_above_one_and_converged(self, profiles, mass):
        p = profiles(mass)
        lam = spectrum.poincare_constant(p, 0, True)
        lam2 = spectrum.poincare_constant(solve_stationary(mass, p.grid.refined()), 0, True)
        assert lam > 1.01
        assert abs(lam - lam2) < 5e-4 * lam2

    def test_constraint_is_enforced(self, mid):
        res = spectrum.poincare_mode(mid, 0, True)
        assert res.orthogonality < 1e-10

    def test_k1_sector_above_one(self, mid):
        assert spectrum.poincare_constant(mid, 1) > 1

    def test_heavy_mass_value_below_one_raises(self, heavy):
        with pytest.raises(ConvergenceError, match="<= 1"):
            spectrum.poincare_constant(heavy, 0, True)
        assert spectrum.poincare_mode(heavy, 0, True, check=False).value < 1

    def test_bad_harmonic(self, unit):
        with pytest.raises(PreconditionError):
            spectrum.poincare_mode(unit, 2)
