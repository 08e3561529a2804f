import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomlaser.grid import (evaporation_enforcement, gregory_weights,
                            make_system_state, uniform_grid)
from atomlaser.trap import tf_chemical_potential


def test_grid_endpoints(kbt540):
    grid = uniform_grid(3.0 * kbt540, 400)
    assert grid.nodes[0] == 0.0
    assert grid.nodes[-1] == pytest.approx(3.0 * kbt540, rel=1e-15)
    assert grid.n == 400
    dx = np.diff(grid.nodes)
    assert dx == pytest.approx(grid.spacing, rel=1e-12)


def test_weights_integrate_quadratic(kbt540):
    # contract at the default resolution: integral of eps^2 over the grid
    # to < 1e-6 relative
    cut = 3.0 * kbt540
    grid = uniform_grid(cut, 400)
    got = float(np.sum(grid.weights * grid.nodes**2))
    assert got == pytest.approx(cut**3 / 3.0, rel=1e-6)


@given(st.integers(min_value=12, max_value=300),
       st.floats(min_value=0.1, max_value=10.0))
@settings(max_examples=40, deadline=None)
def test_weights_polynomial_property(n, scale):
    # end-corrected trapezoid: error on smooth integrands falls like h^3
    grid = uniform_grid(scale, n)
    a, b, c = 0.7, -1.3, 2.1
    got = float(np.sum(grid.weights
                       * (a * grid.nodes**2 + b * grid.nodes + c)))
    want = a * scale**3 / 3 + b * scale**2 / 2 + c * scale
    assert got == pytest.approx(want, rel=2.0 * (n - 1) ** -3)


def test_weights_positive_and_total(kbt540):
    grid = uniform_grid(kbt540, 128)
    assert np.all(grid.weights > 0)
    assert float(np.sum(grid.weights)) == pytest.approx(kbt540, rel=1e-12)


def test_gregory_weights_small_n():
    w = gregory_weights(2, 0.5)
    assert w == pytest.approx([0.25, 0.25])


def test_grid_validation():
    with pytest.raises(ValueError):
        uniform_grid(-1.0, 16)
    with pytest.raises(ValueError):
        uniform_grid(1.0, 4)


def test_live_slice_limits(ts, kbt540):
    grid = uniform_grid(3.0 * kbt540, 100)
    assert grid.live_slice(0.0) == grid.n
    assert grid.live_slice(10.0 * kbt540) == 0
    # boundary node exactly at eps_cut - mu stays live
    mu = grid.nodes[60]
    live = grid.live_slice(grid.eps_cut - mu)
    assert live == 61


def test_make_system_state_consistency(ts, kbt540):
    grid = uniform_grid(3.0 * kbt540, 64)
    g = np.exp(-grid.nodes / kbt540)
    g[0] = 0.0
    state = make_system_state(3e5, g, grid, ts)
    assert state.mu == tf_chemical_potential(3e5, ts)
    assert state.thermal.rho_bar[0] == 0.0
    assert state.total_number == state.n0 + state.thermal.number()
    assert 0.0 < state.condensate_fraction < 1.0
    with pytest.raises(ValueError):
        make_system_state(-1.0, g, grid, ts)
    with pytest.raises(ValueError):
        make_system_state(1.0, g[:-1], grid, ts)


def test_empty_state_fraction(ts, kbt540):
    grid = uniform_grid(kbt540, 32)
    state = make_system_state(0.0, np.zeros(32), grid, ts)
    assert state.condensate_fraction == 0.0
    assert state.mu == 0.0


def test_enforcement_clears_dead_zone(ts, kbt540):
    grid = uniform_grid(3.0 * kbt540, 80)
    g = np.ones(80)
    g[0] = 0.0
    state = make_system_state(2e6, g, grid, ts)
    live = grid.live_slice(state.mu)
    assert live < grid.n  # mu large enough to shade the top nodes
    cleaned, removed = evaporation_enforcement(state)
    assert np.all(cleaned.thermal.g[live:] == 0.0)
    assert np.all(cleaned.thermal.g[:live] == state.thermal.g[:live])
    # removed atoms are the grid-weighted occupation of the cleared nodes
    w = grid.weights[live:]
    rho = state.thermal.rho_bar[live:]
    assert removed == pytest.approx(float(np.sum(w * rho * 1.0)), rel=1e-12)
    again, removed2 = evaporation_enforcement(cleaned)
    assert removed2 == 0.0
    assert np.array_equal(again.thermal.g, cleaned.thermal.g)
