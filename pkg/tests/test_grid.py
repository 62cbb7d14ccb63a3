import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ksgap.grid import RadialGrid, cumulative, integrate, tail_cumulative


def test_default_grid_shape():
    g = RadialGrid.geometric()
    assert g.nodes[0] == 1e-6 and g.nodes[-1] == 400.0
    assert np.all(np.diff(g.nodes) > 0)
    assert np.diff(g.nodes).max() <= 0.1 + 1e-12
    assert len(g) == g.nodes.size


def test_refined_has_about_twice_the_nodes():
    g = RadialGrid.geometric()
    assert 1.8 < len(g.refined()) / len(g) < 2.2


@pytest.mark.parametrize("bad", [dict(s0=0.0), dict(ratio=1.0), dict(s_max=1e-7), dict(max_spacing=0)])
def test_geometric_rejects_bad_parameters(bad):
    with pytest.raises(ValueError):
        RadialGrid.geometric(**bad)


def test_from_nodes_validation():
    with pytest.raises(ValueError):
        RadialGrid.from_nodes([1.0, 0.5, 2.0, 3.0])
    g = RadialGrid.from_nodes(np.geomspace(1e-3, 10, 50))
    assert g.s0 == pytest.approx(1e-3)


def test_with_nodes():
    g = RadialGrid.with_nodes(32)
    assert len(g) == 32 and g.nodes[-1] == pytest.approx(400.0)


def test_quadrature_of_gaussian_tail():
    s = RadialGrid.geometric().nodes
    g = np.exp(-s / 2)
    assert integrate(s, g) == pytest.approx(2.0, rel=1e-9)
    c = cumulative(s, g)
    np.testing.assert_allclose(c, 2 * (1 - np.exp(-s / 2)), atol=1e-9)
    np.testing.assert_allclose(tail_cumulative(s, g), c[-1] - c)


@settings(max_examples=25, deadline=None)
@given(p=st.floats(0.0, 3.0))
def test_quadrature_of_powers(p):
    # growing integrands see the O(h^4) spline error in log s, about 2e-8 here
    s = RadialGrid.geometric(s_max=4.0).nodes
    assert integrate(s, s**p) == pytest.approx(4.0 ** (p + 1) / (p + 1), rel=1e-7)
