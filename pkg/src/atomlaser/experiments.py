"""Steady-state studies: parameter sweeps, truncation-energy optimization,
phase-space-flux scans and source-catalog evaluation.

All studies reduce to repeated steady-state solves.  Points along a
sequential sweep reuse the previous solution as a warm start (with a cold
restart if the warm start fails); parallel execution uses cold starts so
results do not depend on worker scheduling.  Output ordering always
follows input ordering.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .constants import HBAR, K_B
from .grid import EnergyGrid, SystemState, make_system_state, uniform_grid
from .integrator import (EvolveResult, IntegratorConfig, StiffnessError,
                         evolve, make_initial_state)
from .rates import PumpParams, make_rhs_context
from .trap import TrapSpecies

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

SWEEP_PARAMETERS = ("Phi", "T", "eps_cut", "gamma")

#: boundaries of eps_cut*/(k_B T) separating the scan groups
GROUP_BOUNDS = (0.1, 0.5)
GROUP_NAMES = ("high-T", "marginal", "low-T")


def compute_kappa(flux: float, temperature: float, ts: TrapSpecies) -> float:
    """Phase-space flux kappa = Phi (hbar omega_bar / k_B T)^3, 1/s."""
    if flux < 0:
        raise ValueError("flux must be non-negative")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return flux * (ts.energy_quantum / (K_B * temperature)) ** 3


def flux_for_kappa(kappa: float, temperature: float,
                   ts: TrapSpecies) -> float:
    """Flux giving phase-space flux kappa at this temperature."""
    return kappa * (K_B * temperature / ts.energy_quantum) ** 3


def phase_space_density(number: float, temperature: float,
                        ts: TrapSpecies) -> float:
    """Phase-space density N (hbar omega_bar / k_B T)^3 of a pulsed source.

    Divided by the repetition period this gives the peak phase-space flux.
    """
    if number < 0:
        raise ValueError("number must be non-negative")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return number * (ts.energy_quantum / (K_B * temperature)) ** 3


def classify_group(cut_ratio: float,
                   bounds: tuple = GROUP_BOUNDS) -> str:
    """Scan group from the ratio eps_cut/(k_B T) at the optimum."""
    if cut_ratio < bounds[0]:
        return GROUP_NAMES[0]
    if cut_ratio < bounds[1]:
        return GROUP_NAMES[1]
    return GROUP_NAMES[2]


@dataclass(frozen=True)
class SteadyPoint:
    """One steady-state solve, inputs and headline outputs."""

    flux: float
    temperature: float
    eps_cut: float
    gamma: float
    kappa: float
    cut_ratio: float
    n0: float
    n_thermal: float
    fraction: float
    mu: float
    t_steady: float
    flux_below_cut: float
    steady: bool
    group: str | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class SweepSpec:
    """A single-parameter family of steady-state solves."""

    varying: str
    values: tuple
    pump: PumpParams
    ts: TrapSpecies
    cfg: IntegratorConfig
    eps_cut: float
    n_initial: float = 4.2e6
    t_max: float = 60.0

    def __post_init__(self):
        if self.varying not in SWEEP_PARAMETERS:
            raise ValueError(f"varying must be one of {SWEEP_PARAMETERS}")
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ValueError("values must be non-empty")
        if any(v <= 0 for v in vals):
            raise ValueError("sweep values must be positive")
        object.__setattr__(self, "values", vals)
        if self.eps_cut <= 0:
            raise ValueError("eps_cut must be positive")

    def point_inputs(self, value: float):
        """(pump, eps_cut) for one sweep value."""
        if self.varying == "Phi":
            return replace(self.pump, flux=value), self.eps_cut
        if self.varying == "T":
            return replace(self.pump, temperature=value), self.eps_cut
        if self.varying == "gamma":
            return replace(self.pump, outcoupling=value), self.eps_cut
        return self.pump, value


@dataclass(frozen=True)
class OptimizeResult:
    """Outcome of the truncation-energy search."""

    eps_cut: float
    n0: float
    interior_max: bool
    best: SteadyPoint
    points: tuple


def regrid_state(state: SystemState, grid: EnergyGrid,
                 ts: TrapSpecies) -> SystemState:
    """Move a state to a different energy grid by linear interpolation of
    the occupations (zero above the old grid top)."""
    old = state.thermal.grid
    g = np.interp(grid.nodes, old.nodes, state.thermal.g, right=0.0)
    return make_system_state(state.n0, g, grid, ts)


def solve_steady(pump: PumpParams, ts: TrapSpecies, eps_cut: float,
                 cfg: IntegratorConfig, n_initial: float = 4.2e6,
                 t_max: float = 60.0,
                 initial: SystemState | None = None):
    """One steady-state solve.  Returns (SteadyPoint, EvolveResult).

    initial, when given, is regridded as needed and used as a warm start;
    otherwise the run starts from the truncated thermal distribution with
    n_initial atoms at the source temperature.
    """
    grid = uniform_grid(eps_cut, cfg.n_nodes)
    if initial is None:
        state = make_initial_state(n_initial, pump.temperature, grid, ts)
    elif initial.thermal.grid is not grid and (
            initial.thermal.grid.n != grid.n
            or initial.thermal.grid.eps_cut != grid.eps_cut):
        state = regrid_state(initial, grid, ts)
    else:
        state = initial
    ctx = make_rhs_context(grid, pump, ts)
    res = evolve(state, pump, ts, cfg, t_max=t_max, ctx=ctx)
    kbt = K_B * pump.temperature
    point = SteadyPoint(
        flux=pump.flux,
        temperature=pump.temperature,
        eps_cut=eps_cut,
        gamma=pump.outcoupling,
        kappa=compute_kappa(pump.flux, pump.temperature, ts),
        cut_ratio=eps_cut / kbt,
        n0=res.state.n0,
        n_thermal=res.state.thermal.number(),
        fraction=res.state.condensate_fraction,
        mu=res.state.mu,
        t_steady=res.t_steady if res.t_steady is not None else float("nan"),
        flux_below_cut=ctx.rep_delivered,
        steady=res.steady,
    )
    return point, res


def _failed_point(pump, ts, eps_cut, message) -> SteadyPoint:
    kbt = K_B * pump.temperature
    nan = float("nan")
    return SteadyPoint(
        flux=pump.flux, temperature=pump.temperature, eps_cut=eps_cut,
        gamma=pump.outcoupling,
        kappa=compute_kappa(pump.flux, pump.temperature, ts),
        cut_ratio=eps_cut / kbt, n0=nan, n_thermal=nan, fraction=nan,
        mu=nan, t_steady=nan, flux_below_cut=nan, steady=False,
        error=message)


def _sweep_job(args):
    """Cold-start solve of one sweep point (worker-pool entry)."""
    pump, ts, eps_cut, cfg, n_initial, t_max = args
    try:
        point, _ = solve_steady(pump, ts, eps_cut, cfg,
                                n_initial=n_initial, t_max=t_max)
        return point
    except Exception as exc:  # noqa: BLE001 - per-point fault isolation
        return _failed_point(pump, ts, eps_cut, repr(exc))


def sweep(spec: SweepSpec, workers: int = 1) -> list:
    """Steady-state solves over one varying parameter, in input order.

    Sequential runs warm-start each point from the previous solution and
    fall back to a cold start if the warm start fails or does not settle.
    With workers > 1 all points run cold in a process pool.
    """
    jobs = [(*spec.point_inputs(v), spec) for v in spec.values]
    if workers > 1:
        payload = [(pump, spec.ts, cut, spec.cfg, spec.n_initial,
                    spec.t_max) for pump, cut, _ in jobs]
        with ProcessPoolExecutor(max_workers=min(workers,
                                                 len(payload))) as pool:
            return list(pool.map(_sweep_job, payload))

    points = []
    warm = None
    for pump, cut, _ in jobs:
        point, warm = _solve_with_fallback(pump, spec.ts, cut, spec.cfg,
                                           spec.n_initial, spec.t_max, warm)
        points.append(point)
    return points


def _solve_with_fallback(pump, ts, eps_cut, cfg, n_initial, t_max, warm):
    """Warm-start solve with a cold restart on failure.

    Returns (point, final state or None)."""
    if warm is not None:
        try:
            point, res = solve_steady(pump, ts, eps_cut, cfg,
                                      n_initial=n_initial, t_max=t_max,
                                      initial=warm)
            if point.steady:
                return point, res.state
        except StiffnessError:
            pass
    try:
        point, res = solve_steady(pump, ts, eps_cut, cfg,
                                  n_initial=n_initial, t_max=t_max)
        return point, res.state
    except Exception as exc:  # noqa: BLE001 - per-point fault isolation
        return _failed_point(pump, ts, eps_cut, repr(exc)), None


def monotone_within(values, responses, direction: str,
                    tol: float = 0.01) -> bool:
    """Whether responses are monotone in values up to relative noise tol.

    direction is 'nondecreasing' or 'nonincreasing'; pairs are compared in
    order of increasing value."""
    order = np.argsort(np.asarray(values, dtype=float))
    r = np.asarray(responses, dtype=float)[order]
    if np.any(~np.isfinite(r)):
        return False
    scale = np.maximum(np.abs(r[1:]), np.abs(r[:-1]))
    slack = tol * np.where(scale > 0, scale, 1.0)
    diff = np.diff(r)
    if direction == "nondecreasing":
        return bool(np.all(diff >= -slack))
    if direction == "nonincreasing":
        return bool(np.all(diff <= slack))
    raise ValueError("direction must be 'nondecreasing' or 'nonincreasing'")


def optimize_eps_cut(pump: PumpParams, ts: TrapSpecies,
                     cfg: IntegratorConfig, bracket: tuple,
                     n_pre: int = 12, rel_width: float = 1e-2,
                     n_initial: float = 4.2e6, t_max: float = 60.0,
                     solver=None) -> OptimizeResult:
    """Maximize the steady condensate number over the truncation energy.

    Log-spaced pre-scan over the bracket, then golden-section refinement
    around the best pre-scan point down to the given relative interval
    width.  Deterministic; reuses every evaluated point.  If the best
    pre-scan point sits on the bracket edge, or the landscape is flat or
    condensate-free, the best pre-scan point is returned with
    interior_max=False.

    solver(eps_cut, warm_state) -> (SteadyPoint, state) may be injected
    for testing; the default runs solve_steady with warm starts.
    """
    lo, hi = bracket
    if not (0 < lo < hi):
        raise ValueError("bracket must be positive and ordered")
    if n_pre < 4:
        raise ValueError("need at least 4 pre-scan points")

    cache = {}
    warm_box = [None]

    if solver is None:
        def solver(cut, warm):
            point, state = _solve_with_fallback(
                pump, ts, cut, cfg, n_initial, t_max, warm)
            return point, state

    def eval_cut(cut):
        key = float(cut)
        if key not in cache:
            point, state = solver(key, warm_box[0])
            if state is not None:
                warm_box[0] = state
            cache[key] = point
        return cache[key]

    grid_pts = np.geomspace(lo, hi, n_pre)
    pre = [eval_cut(c) for c in grid_pts]
    n0s = np.array([p.n0 if not p.failed else -np.inf for p in pre])
    best_i = int(np.argmax(n0s))
    best = pre[best_i]

    finite = n0s[np.isfinite(n0s)]
    flat = (finite.size == 0 or np.max(finite) < 10.0
            or (np.max(finite) - np.min(finite)) < 1e-3 * np.max(finite))
    on_edge = best_i in (0, n_pre - 1)
    if flat or on_edge:
        points = tuple(sorted(cache.values(), key=lambda p: p.eps_cut))
        return OptimizeResult(best.eps_cut, best.n0, False, best, points)

    a = grid_pts[best_i - 1]
    b = grid_pts[best_i + 1]
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1 = eval_cut(x1).n0
    f2 = eval_cut(x2).n0
    while (b - a) > rel_width * 0.5 * (a + b):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = eval_cut(x2).n0
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = eval_cut(x1).n0

    best = max(cache.values(),
               key=lambda p: p.n0 if not p.failed else -np.inf)
    points = tuple(sorted(cache.values(), key=lambda p: p.eps_cut))
    return OptimizeResult(best.eps_cut, best.n0, True, best, points)


def _scan_job(args):
    """Optimize one scan point (worker-pool entry)."""
    (flux, temperature, pump, ts, cfg, bracket_kbt, n_pre, n_initial,
     t_max, bounds) = args
    kbt = K_B * temperature
    point_pump = replace(pump, flux=flux, temperature=temperature)
    bracket = (bracket_kbt[0] * kbt, bracket_kbt[1] * kbt)
    try:
        opt = optimize_eps_cut(point_pump, ts, cfg, bracket, n_pre=n_pre,
                               n_initial=n_initial, t_max=t_max)
        best = opt.best
        return replace(best, group=classify_group(best.cut_ratio, bounds))
    except Exception as exc:  # noqa: BLE001 - per-point fault isolation
        mid = math.sqrt(bracket_kbt[0] * bracket_kbt[1]) * kbt
        return _failed_point(point_pump, ts, mid, repr(exc))


def kappa_scan(phi_range: tuple, t_range: tuple, counts: tuple,
               pump: PumpParams, ts: TrapSpecies, cfg: IntegratorConfig,
               bracket_kbt: tuple = (1e-3, 8.0), n_pre: int = 12,
               n_initial: float = 4.2e6, t_max: float = 60.0,
               workers: int = 1,
               group_bounds: tuple = GROUP_BOUNDS) -> list:
    """Optimal steady states over a log-spaced (flux, temperature) grid.

    Each grid point runs optimize_eps_cut over a bracket given in units of
    k_B T and is labeled with its group from the optimal cut ratio.
    Failures are recorded per point; output order is the input order
    (fluxes outer, temperatures inner).
    """
    if counts[0] < 2 or counts[1] < 2:
        raise ValueError("counts must be at least 2 in each direction")
    if any(v <= 0 for v in (*phi_range, *t_range)):
        raise ValueError("ranges must be positive")
    phis = np.geomspace(phi_range[0], phi_range[1], counts[0])
    temps = np.geomspace(t_range[0], t_range[1], counts[1])
    jobs = [(phi, temp, pump, ts, cfg, bracket_kbt, n_pre, n_initial,
             t_max, group_bounds)
            for phi in phis for temp in temps]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=min(workers,
                                                 len(jobs))) as pool:
            return list(pool.map(_scan_job, jobs))
    return [_scan_job(job) for job in jobs]


@dataclass(frozen=True)
class SourceVerdict:
    """kappa evaluation of one catalog entry."""

    name: str
    flux: float
    temperature: float
    kappa: float
    passes: bool
    comparison_only: bool = False


def evaluate_sources(catalog, ts: TrapSpecies,
                     threshold: float = 1e-3) -> list:
    """Phase-space flux and threshold verdict for catalog entries.

    catalog rows are (name, flux, temperature[, comparison_only]).
    Comparison-only entries (pulsed references not usable as continuous
    sources) never pass regardless of their kappa.
    """
    out = []
    for row in catalog:
        name, flux, temperature = row[0], float(row[1]), float(row[2])
        comparison = bool(row[3]) if len(row) > 3 else False
        kappa = compute_kappa(flux, temperature, ts)
        out.append(SourceVerdict(
            name=name, flux=flux, temperature=temperature, kappa=kappa,
            passes=kappa >= threshold and not comparison,
            comparison_only=comparison))
    return out
