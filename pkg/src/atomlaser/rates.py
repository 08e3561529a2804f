"""Kinetic process terms for the pumped, truncated thermal cloud.

Every term returns d(rho_bar g)/dt per grid node, in 1/(J s).  Condensate
exchange terms additionally return dN0/dt contributions.  The distribution
is truncated: occupations above eps_cut - mu are held at zero, and
collision products that land beyond the top of the energy grid count as
irreversibly evaporated.

Quadrature conventions: collision double sums use the plain node spacing as
weight (their integrands vanish on all domain boundaries, and the uniform
measure makes pair-exchange cancellation exact in floating point), while
atom-number integrals use the grid's end-corrected weights everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _kernels
from .constants import HBAR, K_B, L3_RB87
from .distributions import bose_einstein, fugacity_for_number, ideal_gas_number
from .dos import harmonic_dos
from .grid import EnergyGrid, SystemState
from .trap import TrapSpecies, tf_chemical_potential

_GL_NODES, _GL_WEIGHTS = leggauss(32)


@dataclass(frozen=True)
class ProcessToggles:
    """Switches for individual kinetic processes."""

    thermal_thermal: bool = True
    thermal_condensate: bool = True
    three_body: bool = True
    replenishment: bool = True
    redistribution: bool = True
    outcoupling: bool = True


@dataclass(frozen=True)
class PumpParams:
    """Source, outcoupling and loss parameters of a run.

    flux : atoms/s delivered by the source (untruncated).
    temperature : source temperature, K.
    outcoupling : condensate outcoupling rate gamma, 1/s.
    l3 : three-body recombination constant, m^6/s.
    source_number : reservoir atom number fixing the source fugacity.
    """

    flux: float
    temperature: float
    outcoupling: float
    l3: float = L3_RB87
    source_number: float = 4.2e6
    toggles: ProcessToggles = field(default_factory=ProcessToggles)

    def __post_init__(self):
        if self.flux < 0:
            raise ValueError("flux must be non-negative")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.outcoupling < 0:
            raise ValueError("outcoupling rate must be non-negative")
        if self.l3 < 0:
            raise ValueError("three-body constant must be non-negative")
        if self.source_number <= 0:
            raise ValueError("source number must be positive")


@dataclass(frozen=True)
class ProcessRates:
    """Per-process rates at one instant.

    Thermal arrays are d(rho_bar g)/dt per node; dn0_* are condensate
    number rates.  tc_gain_above_grid is the flux of collision survivors
    landing beyond the top of the energy grid (they evaporate immediately
    but their partner still joined the condensate, so the flux appears in
    dn0_thermal_condensate with the grid-weighted rate sum).
    """

    thermal_thermal: np.ndarray
    thermal_condensate: np.ndarray
    three_body: np.ndarray
    replenishment: np.ndarray
    redistribution: np.ndarray
    dn0_thermal_condensate: float
    dn0_three_body: float
    dn0_outcoupling: float
    tc_gain_above_grid: float

    @property
    def dn0_total(self) -> float:
        return (self.dn0_thermal_condensate + self.dn0_three_body
                + self.dn0_outcoupling)

    @property
    def thermal_total(self) -> np.ndarray:
        return (self.thermal_thermal + self.thermal_condensate
                + self.three_body + self.replenishment + self.redistribution)


def collision_constant(ts: TrapSpecies) -> float:
    """Prefactor m^3 g^2 / (2 pi^3 hbar^7) of both collision integrals."""
    return ts.mass**3 * ts.g_int**2 / (2.0 * math.pi**3 * HBAR**7)


def source_fugacity(pump: PumpParams, ts: TrapSpecies) -> float:
    """Fugacity of the replenishment reservoir (source_number atoms at T)."""
    return fugacity_for_number(pump.source_number, pump.temperature, ts)


def replenishment_coupling(pump: PumpParams, ts: TrapSpecies) -> float:
    """Rate constant Gamma normalized so the untruncated inflow equals flux."""
    if pump.flux == 0:
        return 0.0
    z = source_fugacity(pump, ts)
    return pump.flux / ideal_gas_number(z, pump.temperature, ts)


def replenishment_profile(grid: EnergyGrid, pump: PumpParams,
                          ts: TrapSpecies) -> np.ndarray:
    """Inflow Gamma rho_0(eps_bar) g_T(eps_bar) per node, 1/(J s).

    Written in shifted energy the profile does not depend on the chemical
    potential, so it is computed once per run.
    """
    if pump.flux == 0:
        return np.zeros(grid.n)
    z = source_fugacity(pump, ts)
    gamma_c = replenishment_coupling(pump, ts)
    occ = bose_einstein(grid.nodes, pump.temperature, z)
    occ = np.where(np.isfinite(occ), occ, 0.0)  # node 0 at z = 1
    return gamma_c * harmonic_dos(grid.nodes, ts) * occ


class RhsContext:
    """Precomputed quantities shared by every right-hand-side evaluation."""

    def __init__(self, grid: EnergyGrid, pump: PumpParams, ts: TrapSpecies,
                 n_radial: int = 32):
        self.grid = grid
        self.pump = pump
        self.ts = ts
        self.n_radial = n_radial
        self.c_coll = collision_constant(ts)
        self.c_rho = ts.mass**1.5 / (math.sqrt(2.0) * math.pi**2 * HBAR**3)
        self.half_m_w2 = 0.5 * ts.mass * ts.omega_bar**2
        self.kbt = K_B * pump.temperature
        # condensate self-loss coefficient: dN0/dt = -l3 * coeff * N0^(9/5),
        # the closed form of -l3 * int nc^3 d3r for a Thomas-Fermi profile
        self.cond_loss_coeff = (15.0**0.8 / (168.0 * math.pi**2)
                                * (ts.mass * ts.omega_bar
                                   / (HBAR * math.sqrt(ts.scattering_length)))
                                ** 2.4)
        if pump.toggles.replenishment:
            self.rep_rate = replenishment_profile(grid, pump, ts)
        else:
            self.rep_rate = np.zeros(grid.n)
        self.rep_delivered = float(np.sum(grid.weights * self.rep_rate))


def make_rhs_context(grid: EnergyGrid, pump: PumpParams,
                     ts: TrapSpecies) -> RhsContext:
    return RhsContext(grid, pump, ts)


def radial_quadrature(mu: float, eps_top: float, kbt: float,
                      ts: TrapSpecies, n_panel: int = 32):
    """Gauss-Legendre nodes covering the thermal cloud, split at the
    condensate surface and at thermal shells so the integrand kinks fall on
    panel edges.  Returns (u, w) in scaled isotropic coordinates."""
    half = 0.5 * ts.mass * ts.omega_bar**2
    edges = [0.0]
    if mu > 0:
        edges.append(math.sqrt(mu / half))
    for wall in (kbt, 5.0 * kbt):
        if wall < eps_top:
            edges.append(math.sqrt((mu + wall) / half))
    edges.append(math.sqrt((mu + eps_top) / half))
    edges = sorted(set(edges))
    us, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a <= 0:
            continue
        us.append(0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES)
        ws.append(0.5 * (b - a) * _GL_WEIGHTS)
    return np.ascontiguousarray(np.concatenate(us)), \
        np.ascontiguousarray(np.concatenate(ws))


def eval_rhs(n0: float, f: np.ndarray, dmu_dt: float, ctx: RhsContext):
    """Process rates for a raw state (n0, rho_bar*g per node).

    Returns (ProcessRates, mu, rho_bar, live) where live is the number of
    nodes at or below the truncation boundary.  Occupations are recovered
    as max(f, 0) / rho_bar on live nodes and treated as zero elsewhere.
    """
    grid, pump, ts = ctx.grid, ctx.pump, ctx.ts
    tg = pump.toggles
    n = grid.n
    eps = grid.nodes
    dx = grid.spacing
    wgt = grid.weights

    n0c = n0 if n0 > 0.0 else 0.0
    mu = tf_chemical_potential(n0c, ts)
    rho, im, ip = _kernels.fill_dos(eps, mu, ts.energy_quantum)
    live = grid.live_slice(mu)

    g = np.zeros(n)
    head = rho[:live]
    np.divide(np.maximum(f[:live], 0.0), head, out=g[:live], where=head > 0)

    zeros = np.zeros(n)
    gpad = None
    if tg.thermal_thermal or tg.thermal_condensate:
        gpad = np.zeros(2 * n - 1)
        gpad[:n] = g

    if tg.thermal_thermal:
        tt = (ctx.c_coll * dx * dx) * _kernels.tt_collision_sum(gpad, rho, n)
    else:
        tt = zeros

    dn0_tc = 0.0
    tc_off = 0.0
    if tg.thermal_condensate and n0c > 0.0:
        raw, goff = _kernels.tc_collision_sum(gpad, eps, dx, mu, n0c, n)
        tc = ctx.c_coll * raw
        tc_off = ctx.c_coll * goff
        dn0_tc = -(float(np.sum(wgt * tc)) + tc_off)
    else:
        tc = zeros

    dn0_tb = 0.0
    if tg.three_body and pump.l3 > 0.0:
        uq, uw = radial_quadrature(mu, grid.eps_cut, ctx.kbt, ts,
                                   ctx.n_radial)
        s_th, s_cd, _, _, _, _ = _kernels.three_body_spatials(
            eps, g, wgt, uq, uw, mu, ctx.half_m_w2, ts.g_int, ctx.c_rho)
        tb = -pump.l3 * g * s_th
        dn0_tb = -pump.l3 * (ctx.cond_loss_coeff * n0c**1.8
                             + float(np.sum(wgt * g * s_cd)))
    else:
        tb = zeros

    if tg.redistribution and dmu_dt != 0.0:
        rho_w = (2.0 / (math.pi * ts.energy_quantum)) * (im - ip) * dmu_dt
        flux = rho_w * g
        faces = 0.5 * (flux[:-1] + flux[1:])
        rd = np.zeros(n)
        rd[1:-1] = -(faces[1:] - faces[:-1]) / dx
        rd[-1] = -(flux[-1] - faces[-1]) / dx
        # node 0 carries no states (rho_bar = 0); pinned
    else:
        rd = zeros

    dn0_out = -pump.outcoupling * n0c if tg.outcoupling else 0.0

    rates = ProcessRates(
        thermal_thermal=tt,
        thermal_condensate=tc,
        three_body=tb,
        replenishment=ctx.rep_rate,
        redistribution=rd,
        dn0_thermal_condensate=dn0_tc,
        dn0_three_body=dn0_tb,
        dn0_outcoupling=dn0_out,
        tc_gain_above_grid=tc_off,
    )
    return rates, mu, rho, live


def assemble_rhs(state: SystemState, pump: PumpParams, ts: TrapSpecies,
                 dmu_dt: float = 0.0,
                 ctx: RhsContext | None = None) -> ProcessRates:
    """Process rates for a SystemState snapshot."""
    if ctx is None:
        ctx = make_rhs_context(state.thermal.grid, pump, ts)
    f = state.thermal.rho_bar * state.thermal.g
    rates, _, _, _ = eval_rhs(state.n0, f, dmu_dt, ctx)
    return rates


# ---------------------------------------------------------------------------
# standalone per-process entry points (diagnostics and tests)
# ---------------------------------------------------------------------------

def thermal_thermal_term(state: SystemState, ts: TrapSpecies) -> np.ndarray:
    """Thermal-thermal collision rate d(rho_bar g)/dt per node.

    The plain-spacing sum dx * sum(rate) vanishes to rounding whenever no
    collision product can land above the top of the grid; otherwise its
    negative is the evaporative loss through the grid top.
    """
    grid = state.thermal.grid
    n = grid.n
    gpad = np.zeros(2 * n - 1)
    gpad[:n] = state.thermal.g
    raw = _kernels.tt_collision_sum(gpad, state.thermal.rho_bar, n)
    return collision_constant(ts) * grid.spacing**2 * raw


def thermal_condensate_term(state: SystemState, ts: TrapSpecies):
    """Condensate-exchange collision term.

    Returns (rates, dn0, gain_above_grid); dn0 is minus the grid-weighted
    sum of the rates minus the above-grid survivor gain, so condensate gain
    and thermal loss balance exactly as computed.
    """
    grid = state.thermal.grid
    n = grid.n
    gpad = np.zeros(2 * n - 1)
    gpad[:n] = state.thermal.g
    raw, goff = _kernels.tc_collision_sum(gpad, grid.nodes, grid.spacing,
                                          state.mu, state.n0, n)
    c = collision_constant(ts)
    rates = c * raw
    gain_off = c * goff
    dn0 = -(float(np.sum(grid.weights * rates)) + gain_off)
    return rates, dn0, gain_off


def three_body_term(state: SystemState, ts: TrapSpecies, l3: float,
                    temperature: float | None = None):
    """Three-body loss: per-node thermal rates and condensate rate.

    Returns (rates, dn0).  The condensate rate combines the closed-form
    self-loss of the Thomas-Fermi profile with the mixed condensate-thermal
    terms integrated on the shared radial grid.
    """
    if l3 < 0:
        raise ValueError("three-body constant must be non-negative")
    grid = state.thermal.grid
    kbt = K_B * temperature if temperature else grid.eps_cut / 3.0
    uq, uw = radial_quadrature(state.mu, grid.eps_cut, kbt, ts)
    c_rho = ts.mass**1.5 / (math.sqrt(2.0) * math.pi**2 * HBAR**3)
    s_th, s_cd, _, _, _, _ = _kernels.three_body_spatials(
        grid.nodes, state.thermal.g, grid.weights, uq, uw, state.mu,
        0.5 * ts.mass * ts.omega_bar**2, ts.g_int, c_rho)
    rates = -l3 * state.thermal.g * s_th
    coeff = (15.0**0.8 / (168.0 * math.pi**2)
             * (ts.mass * ts.omega_bar
                / (HBAR * math.sqrt(ts.scattering_length))) ** 2.4)
    dn0 = -l3 * (coeff * max(state.n0, 0.0)**1.8
                 + float(np.sum(grid.weights * state.thermal.g * s_cd)))
    return rates, dn0


def three_body_density_moments(state: SystemState, ts: TrapSpecies,
                               temperature: float | None = None):
    """Spatial integrals of nc^3, nc^2 nt, nc nt^2, nt^3 (m^-3 weighted).

    Uses the same radial grid and thermal density as three_body_term, so
    -l3 (nc3 + 9 nc2nt + 18 ncnt2 + 6 nt3) equals the total three-body
    atom loss to rounding.
    """
    grid = state.thermal.grid
    kbt = K_B * temperature if temperature else grid.eps_cut / 3.0
    uq, uw = radial_quadrature(state.mu, grid.eps_cut, kbt, ts)
    c_rho = ts.mass**1.5 / (math.sqrt(2.0) * math.pi**2 * HBAR**3)
    _, _, m_nc3, m_nc2nt, m_ncnt2, m_nt3 = _kernels.three_body_spatials(
        grid.nodes, state.thermal.g, grid.weights, uq, uw, state.mu,
        0.5 * ts.mass * ts.omega_bar**2, ts.g_int, c_rho)
    return m_nc3, m_nc2nt, m_ncnt2, m_nt3


def redistribution_term(state: SystemState, ts: TrapSpecies,
                        dmu_dt: float) -> np.ndarray:
    """Advection of the distribution by the moving shifted-energy origin.

    Conservative central differencing of the flux rho_w g; the plain-spacing
    sum over nodes 1..n-1 equals the boundary flux difference exactly.
    """
    grid = state.thermal.grid
    _, im, ip = _kernels.fill_dos(grid.nodes, state.mu, ts.energy_quantum)
    rho_w = (2.0 / (math.pi * ts.energy_quantum)) * (im - ip) * dmu_dt
    flux = rho_w * state.thermal.g
    faces = 0.5 * (flux[:-1] + flux[1:])
    out = np.zeros(grid.n)
    out[1:-1] = -(faces[1:] - faces[:-1]) / grid.spacing
    out[-1] = -(flux[-1] - faces[-1]) / grid.spacing
    return out


def _equilibrium_pad(grid: EnergyGrid, temperature: float,
                     fugacity: float) -> np.ndarray:
    """Bose-Einstein occupation over the doubled product range.

    Node 0 is zeroed: it carries no states (the density of states vanishes
    there), so its occupation never contributes to any kernel sum.
    """
    n = grid.n
    eps = np.arange(2 * n - 1) * grid.spacing
    kbt = K_B * temperature
    with np.errstate(divide="ignore"):
        gpad = 1.0 / (np.exp(eps / kbt) / fugacity - 1.0)
    gpad[0] = 0.0
    return gpad


def collision_balance_residual(grid: EnergyGrid, temperature: float,
                               fugacity: float, ts: TrapSpecies) -> float:
    """Stationarity residual of the binary collision term for equilibrium
    occupations, relative to the collision scale of a perturbed state.

    Equilibrium extends across the doubled product range here, so nothing
    evaporates and the residual is pure rounding for any fugacity < 1.
    """
    if not 0.0 < fugacity < 1.0:
        raise ValueError("fugacity must be in (0, 1)")
    n = grid.n
    gpad = _equilibrium_pad(grid, temperature, fugacity)
    rho = harmonic_dos(grid.nodes, ts)
    out_eq = _kernels.tt_collision_sum(gpad, rho, n)
    bump = gpad.copy()
    bump[n // 3:2 * n // 3] *= 1.5
    out_ref = _kernels.tt_collision_sum(bump, rho, n)
    return float(np.max(np.abs(out_eq)) / (np.max(np.abs(out_ref)) + 1e-300))


def exchange_balance_residual(grid: EnergyGrid, temperature: float,
                              n0: float, ts: TrapSpecies) -> float:
    """Stationarity residual of the condensate-exchange term at saturation.

    With unit fugacity in the shifted frame, gain to and loss from the
    condensate cancel pairwise; any fugacity below one drives net growth.
    Relative to the rate of a perturbed occupation, as above.
    """
    if n0 <= 0:
        raise ValueError("needs a condensate")
    n = grid.n
    eps = np.arange(2 * n - 1) * grid.spacing
    kbt = K_B * temperature
    with np.errstate(divide="ignore"):
        gpad = 1.0 / np.expm1(eps / kbt)
    gpad[0] = 0.0
    mu = tf_chemical_potential(n0, ts)
    out_eq, _ = _kernels.tc_collision_sum(gpad, grid.nodes, grid.spacing,
                                          mu, n0, n)
    bump = gpad.copy()
    bump[n // 3:2 * n // 3] *= 1.5
    out_ref, _ = _kernels.tc_collision_sum(bump, grid.nodes, grid.spacing,
                                           mu, n0, n)
    return float(np.max(np.abs(out_eq)) / (np.max(np.abs(out_ref)) + 1e-300))
