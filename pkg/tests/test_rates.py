import math

import numpy as np
import pytest
from scipy.integrate import quad

from atomlaser.constants import HBAR, K_B
from atomlaser.distributions import ideal_gas_number
from atomlaser.dos import harmonic_dos, shifted_dos
from atomlaser.grid import make_system_state, uniform_grid
from atomlaser.rates import (ProcessToggles, PumpParams,
                             collision_balance_residual, collision_constant,
                             exchange_balance_residual, make_rhs_context,
                             assemble_rhs, redistribution_term,
                             replenishment_coupling, replenishment_profile,
                             source_fugacity, thermal_condensate_term,
                             thermal_thermal_term,
                             three_body_density_moments, three_body_term)
from atomlaser.trap import (condensate_density, tf_chemical_potential,
                            tf_radius)
from oracles import brute_tc, brute_tt

L3 = 5.8e-42


def fig2_pump(**kw):
    base = dict(flux=8.4e5, temperature=540e-9, outcoupling=0.3)
    base.update(kw)
    return PumpParams(**base)


# ---------------------------------------------------------------------------
# thermal-thermal collisions
# ---------------------------------------------------------------------------

def test_collision_constant_value(ts):
    # m^3 g^2 / (2 pi^3 hbar^7) equals the standard ergodic-kinetics
    # prefactor m sigma / (pi^2 hbar^3) with sigma = 8 pi a^2
    direct = ts.mass**3 * ts.g_int**2 / (2.0 * math.pi**3 * HBAR**7)
    sigma = 8.0 * math.pi * ts.scattering_length**2
    classic = ts.mass * sigma / (math.pi**2 * HBAR**3)
    assert collision_constant(ts) == pytest.approx(direct, rel=1e-14)
    assert collision_constant(ts) == pytest.approx(classic, rel=1e-12)


def test_tt_empty_cloud_is_quiet(ts, kbt540):
    grid = uniform_grid(3.0 * kbt540, 32)
    state = make_system_state(1e5, np.zeros(32), grid, ts)
    assert np.all(thermal_thermal_term(state, ts) == 0.0)


def test_tt_brute_force_oracle(ts, small_state):
    # O(n^3) direct enumeration on a 24-node grid
    grid = small_state.thermal.grid
    n = grid.n
    gpad = np.zeros(2 * n - 1)
    gpad[:n] = small_state.thermal.g
    want = collision_constant(ts) * grid.spacing**2 \
        * brute_tt(gpad, small_state.thermal.rho_bar, n)
    got = thermal_thermal_term(small_state, ts)
    scale = np.max(np.abs(want))
    assert np.max(np.abs(got - want)) < 1e-8 * scale


def test_tt_number_conservation(ts, kbt540, rng):
    # with support confined to the lower half no product can leave the
    # grid, so the plain-spacing sum vanishes to rounding
    grid = uniform_grid(3.0 * kbt540, 48)
    g = rng.uniform(0.0, 2.0, grid.n)
    g[0] = 0.0
    g[grid.n // 2:] = 0.0
    state = make_system_state(5e4, g, grid, ts)
    out = thermal_thermal_term(state, ts)
    scale = float(np.sum(np.abs(out))) * grid.spacing
    assert abs(float(np.sum(out)) * grid.spacing) < 1e-8 * scale


def test_tt_detailed_balance(ts, kbt540):
    # equilibrium occupations extended over the doubled range are exactly
    # stationary, at any fugacity
    grid = uniform_grid(3.0 * kbt540, 40)
    for z in (0.3, 0.9, 0.999):
        res = collision_balance_residual(grid, 540e-9, z, ts)
        assert res < 1e-6


def test_tt_evaporation_is_pure_loss(ts, kbt540):
    # occupations reaching the top of the grid scatter partners beyond it;
    # the net plain-spacing sum must then be strictly negative
    grid = uniform_grid(2.0 * kbt540, 40)
    g = np.exp(-grid.nodes / kbt540)
    g[0] = 0.0
    state = make_system_state(0.0, g, grid, ts)
    out = thermal_thermal_term(state, ts)
    assert float(np.sum(out)) * grid.spacing < 0.0


# ---------------------------------------------------------------------------
# thermal-condensate exchange
# ---------------------------------------------------------------------------

def test_tc_zero_without_condensate(ts, small_state):
    grid = small_state.thermal.grid
    state = make_system_state(0.0, small_state.thermal.g, grid, ts)
    rates, dn0, goff = thermal_condensate_term(state, ts)
    assert np.all(rates == 0.0)
    assert dn0 == 0.0
    assert goff == 0.0


def test_tc_brute_force_oracle(ts, small_state):
    grid = small_state.thermal.grid
    n = grid.n
    gpad = np.zeros(2 * n - 1)
    gpad[:n] = small_state.thermal.g
    raw, goff_raw = brute_tc(gpad, grid.nodes, grid.spacing,
                             small_state.mu, small_state.n0, ts)
    c = collision_constant(ts)
    want = c * raw
    got, dn0, goff = thermal_condensate_term(small_state, ts)
    scale = np.max(np.abs(want))
    assert np.max(np.abs(got - want)) < 1e-6 * scale
    assert goff == pytest.approx(c * goff_raw, rel=1e-6, abs=1e-12 * scale)


def test_tc_number_exchange_identity(ts, small_state):
    # condensate gain balances thermal loss exactly as computed
    grid = small_state.thermal.grid
    rates, dn0, goff = thermal_condensate_term(small_state, ts)
    assert dn0 == -(float(np.sum(grid.weights * rates)) + goff)


def test_tc_detailed_balance_at_saturation(ts, kbt540):
    grid = uniform_grid(3.0 * kbt540, 40)
    res = exchange_balance_residual(grid, 540e-9, 2e5, ts)
    assert res < 1e-6


def test_tc_exchange_direction(ts, kbt540):
    # an under-saturated vapor pulls atoms out of the condensate; scaling
    # the saturated occupation up reverses the flow
    grid = uniform_grid(3.0 * kbt540, 48)
    with np.errstate(divide="ignore"):
        g_sat = 1.0 / np.expm1(grid.nodes / kbt540)
    g_sat[0] = 0.0
    lean = make_system_state(2e5, 0.7 * g_sat, grid, ts)
    rich = make_system_state(2e5, 1.3 * g_sat, grid, ts)
    _, dn0_lean, _ = thermal_condensate_term(lean, ts)
    _, dn0_rich, _ = thermal_condensate_term(rich, ts)
    assert dn0_lean < 0.0
    assert dn0_rich > 0.0


# ---------------------------------------------------------------------------
# three-body recombination
# ---------------------------------------------------------------------------

def test_three_body_condensate_closed_form(ts):
    # the pure-condensate loss coefficient equals the spatial integral of
    # the cubed Thomas-Fermi density
    n0 = 1.3e6
    mu = tf_chemical_potential(n0, ts)
    half = 0.5 * ts.mass * ts.omega_bar**2
    i3, _ = quad(lambda u: 4 * math.pi * u**2
                 * ((mu - half * u**2) / ts.g_int) ** 3,
                 0.0, tf_radius(mu, ts))
    coeff = (15.0**0.8 / (168.0 * math.pi**2)
             * (ts.mass * ts.omega_bar
                / (HBAR * math.sqrt(ts.scattering_length))) ** 2.4)
    assert coeff * n0**1.8 == pytest.approx(i3, rel=1e-8)

    grid = uniform_grid(1e-30, 16)
    state = make_system_state(n0, np.zeros(16), grid, ts)
    rates, dn0 = three_body_term(state, ts, L3, temperature=540e-9)
    assert np.all(rates == 0.0)
    assert dn0 == pytest.approx(-L3 * i3, rel=1e-8)


def test_three_body_split_identity(ts, small_state):
    # total atom loss decomposes over the density moments with the
    # combinatorial weights of condensed/thermal participants
    grid = small_state.thermal.grid
    rates, dn0 = three_body_term(small_state, ts, L3, temperature=540e-9)
    total = dn0 + float(np.sum(grid.weights * rates))
    nc3, nc2nt, ncnt2, nt3 = three_body_density_moments(
        small_state, ts, temperature=540e-9)
    want = -L3 * (nc3 + 9.0 * nc2nt + 18.0 * ncnt2 + 6.0 * nt3)
    assert total == pytest.approx(want, rel=1e-6)


def test_three_body_moments_against_quadrature(ts, kbt540):
    # independent radial quadrature of nc^2 nt for a one-node occupation
    grid = uniform_grid(3.0 * kbt540, 64)
    g = np.zeros(grid.n)
    g[20] = 1.7
    n0 = 8e5
    state = make_system_state(n0, g, grid, ts)
    mu = state.mu
    half = 0.5 * ts.mass * ts.omega_bar**2
    c_rho = ts.mass**1.5 / (math.sqrt(2.0) * math.pi**2 * HBAR**3)
    eps20 = grid.nodes[20]
    w20 = grid.weights[20] * g[20]

    def nt(u):
        ueff = abs(mu - half * u * u)
        d = eps20 - ueff
        return w20 * c_rho * math.sqrt(d) if d > 0 else 0.0

    def nc(u):
        return max(mu - half * u * u, 0.0) / ts.g_int

    want, _ = quad(lambda u: 4 * math.pi * u**2 * nc(u) ** 2 * nt(u),
                   0.0, tf_radius(mu, ts), limit=200)
    _, nc2nt, _, _ = three_body_density_moments(state, ts,
                                                temperature=540e-9)
    assert nc2nt == pytest.approx(want, rel=1e-6)


# ---------------------------------------------------------------------------
# replenishment
# ---------------------------------------------------------------------------

def test_replenishment_closes_the_flux(ts):
    # Gamma rho0 g_T integrates to the full source flux on an untruncated
    # grid: the coupling is defined by exactly that normalization
    pump = fig2_pump()
    z = source_fugacity(pump, ts)
    gamma = replenishment_coupling(pump, ts)
    kbt = K_B * pump.temperature

    def integrand(e):
        return harmonic_dos(np.array([e]), ts)[0] \
            / (math.exp(e / kbt) / z - 1.0)

    total, _ = quad(integrand, 0.0, 60.0 * kbt, limit=400)
    assert gamma * total == pytest.approx(pump.flux, rel=1e-6)


def test_replenishment_profile_properties(ts, kbt540):
    pump = fig2_pump()
    grid = uniform_grid(3.0 * kbt540, 400)
    rep = replenishment_profile(grid, pump, ts)
    assert np.all(np.isfinite(rep))
    assert np.all(rep >= 0.0)
    assert rep[0] == 0.0
    delivered = float(np.sum(grid.weights * rep))
    assert 0.0 < delivered < pump.flux


def test_source_fugacity_matches_reservoir(ts):
    pump = fig2_pump()
    z = source_fugacity(pump, ts)
    assert ideal_gas_number(z, pump.temperature, ts) == pytest.approx(
        pump.source_number, rel=1e-6)


# ---------------------------------------------------------------------------
# redistribution
# ---------------------------------------------------------------------------

def test_redistribution_conserves_interior(ts, kbt540):
    # the plain-spacing sum over nodes 1..n-1 telescopes to the boundary
    # flux difference
    grid = uniform_grid(3.0 * kbt540, 64)
    g = np.exp(-grid.nodes / kbt540) * (1.0 + 0.2 * np.sin(
        5.0 * grid.nodes / kbt540))
    g[0] = 0.0
    state = make_system_state(4e5, g, grid, ts)
    dmu_dt = 0.7 * state.mu
    out = redistribution_term(state, ts, dmu_dt)
    assert out[0] == 0.0
    from atomlaser.dos import weighted_dos
    flux = weighted_dos(grid.nodes, state.mu, dmu_dt, ts) * g
    interior = float(np.sum(out[1:]) * grid.spacing)
    faces0 = 0.5 * (flux[0] + flux[1])
    assert interior == pytest.approx(faces0 - flux[-1],
                                     rel=1e-10, abs=1e-10 * abs(flux[-1]))


def test_redistribution_matches_flux_divergence(ts, kbt540):
    # central differences converge to the analytic divergence away from
    # the weight kink at eps_bar = mu
    from atomlaser.dos import weighted_dos
    errs = []
    for n in (200, 400):
        grid = uniform_grid(3.0 * kbt540, n)
        g = np.exp(-grid.nodes / kbt540)
        g[0] = 0.0
        state = make_system_state(6e5, g, grid, ts)
        dmu_dt = 0.3 * state.mu
        out = redistribution_term(state, ts, dmu_dt)
        de = 1e-7 * kbt540
        idx = np.arange(n)
        mask = (idx >= 5) & (idx <= n - 6) \
            & (np.abs(grid.nodes - state.mu) > 0.05 * kbt540)
        eps_m = grid.nodes[mask]
        f_hi = weighted_dos(eps_m + de, state.mu, dmu_dt, ts) \
            * np.exp(-(eps_m + de) / kbt540)
        f_lo = weighted_dos(eps_m - de, state.mu, dmu_dt, ts) \
            * np.exp(-(eps_m - de) / kbt540)
        analytic = -(f_hi - f_lo) / (2 * de)
        errs.append(np.max(np.abs(out[mask] - analytic))
                    / np.max(np.abs(analytic)))
    assert errs[1] < 0.4 * errs[0]  # second-order spatial convergence
    assert errs[1] < 1e-3


# ---------------------------------------------------------------------------
# assembled right-hand side
# ---------------------------------------------------------------------------

def test_assembled_rhs_equals_term_sum(ts, small_state):
    # the assembler reconstructs occupations inside the live window only,
    # so enforce truncation first to put both paths on the same state
    from atomlaser.grid import evaporation_enforcement
    state, _ = evaporation_enforcement(small_state)
    pump = fig2_pump()
    grid = state.thermal.grid
    dmu_dt = 0.1 * state.mu
    rates = assemble_rhs(state, pump, ts, dmu_dt=dmu_dt)

    tt = thermal_thermal_term(state, ts)
    tc, dn0_tc, goff = thermal_condensate_term(state, ts)
    tb, dn0_tb = three_body_term(state, ts, pump.l3,
                                 temperature=pump.temperature)
    rep = replenishment_profile(grid, pump, ts)
    rd = redistribution_term(state, ts, dmu_dt)

    assert rates.thermal_thermal == pytest.approx(tt, rel=1e-12)
    assert rates.thermal_condensate == pytest.approx(tc, rel=1e-12)
    assert rates.three_body == pytest.approx(tb, rel=1e-12)
    assert rates.replenishment == pytest.approx(rep, rel=1e-12)
    assert rates.redistribution == pytest.approx(rd, rel=1e-12)
    assert rates.dn0_thermal_condensate == pytest.approx(dn0_tc, rel=1e-12)
    assert rates.dn0_three_body == pytest.approx(dn0_tb, rel=1e-12)
    assert rates.dn0_outcoupling == pytest.approx(
        -pump.outcoupling * state.n0, rel=1e-14)
    assert rates.thermal_total == pytest.approx(tt + tc + tb + rep + rd,
                                                rel=1e-12)


@pytest.mark.parametrize("name", ["thermal_thermal", "thermal_condensate",
                                  "three_body", "replenishment",
                                  "redistribution", "outcoupling"])
def test_each_toggle_silences_its_process(ts, small_state, name):
    toggles = ProcessToggles(**{name: False})
    pump = fig2_pump(toggles=toggles)
    rates = assemble_rhs(small_state, pump, ts, dmu_dt=0.1 * small_state.mu)
    if name == "outcoupling":
        assert rates.dn0_outcoupling == 0.0
    else:
        assert np.all(getattr(rates, name) == 0.0)
    if name == "thermal_condensate":
        assert rates.dn0_thermal_condensate == 0.0
    if name == "three_body":
        assert rates.dn0_three_body == 0.0


def test_truncated_occupations_ignored_beyond_live_window(ts, kbt540):
    # occupation stored above eps_cut - mu is dead: it must not change any
    # rate
    grid = uniform_grid(2.0 * kbt540, 48)
    g = np.exp(-grid.nodes / kbt540)
    g[0] = 0.0
    state = make_system_state(2.5e6, g, grid, ts)
    live = grid.live_slice(state.mu)
    assert live < grid.n
    pump = fig2_pump()
    ctx = make_rhs_context(grid, pump, ts)
    from atomlaser.rates import eval_rhs
    f = state.thermal.rho_bar * state.thermal.g
    base, _, _, _ = eval_rhs(state.n0, f.copy(), 0.0, ctx)
    f2 = f.copy()
    f2[live:] *= 7.0
    alt, _, _, _ = eval_rhs(state.n0, f2, 0.0, ctx)
    assert np.array_equal(base.thermal_total, alt.thermal_total)
    assert base.dn0_total == alt.dn0_total


def test_pump_params_validation():
    with pytest.raises(ValueError):
        PumpParams(flux=-1.0, temperature=540e-9, outcoupling=0.3)
    with pytest.raises(ValueError):
        PumpParams(flux=1e5, temperature=0.0, outcoupling=0.3)
    with pytest.raises(ValueError):
        PumpParams(flux=1e5, temperature=540e-9, outcoupling=-0.1)
    with pytest.raises(ValueError):
        PumpParams(flux=1e5, temperature=540e-9, outcoupling=0.3, l3=-1.0)
