"""Adaptive time evolution of the pumped-cloud kinetics.

Dormand-Prince 5(4) embedded pair with a mixed absolute/relative error
norm over the condensate number and the live occupancies.  After every
accepted step the chemical potential is recomputed from N0 (never
integrated), the truncation window is re-enforced, and negative
occupancies are clamped; all discrete corrections are tracked so the
global number budget closes exactly.

The state vector is [N0, (rho_bar g)_0 .. (rho_bar g)_{n-1}, L1..L5]
where the five trailing slots accumulate the signed atom-number
contribution of each process (replenishment, net collisions, three-body,
outcoupling, redistribution boundary flux).  The slots integrate the same
linear combinations of the same stage derivatives as N0 + N_T, so the
audit identity holds to rounding, independent of step size.
"""

from __future__ import annotations

import math
import time
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .distributions import bose_einstein, fugacity_for_number
from .grid import EnergyGrid, SystemState, ThermalState
from .rates import ProcessRates, PumpParams, RhsContext, eval_rhs, \
    make_rhs_context
from .trap import TrapSpecies, tf_chemical_potential

# Dormand-Prince 5(4) tableau; the high-order weights are row 7
_DP_C = (0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (),
    (0.2,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_DP_ERR = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
           -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


class StiffnessError(RuntimeError):
    """Step size underflow; carries the partial trajectory and last state."""

    def __init__(self, message, t, dt, state=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.dt = dt
        self.state = state
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances, step control and steady-state detection settings."""

    rtol: float = 1e-6
    atol_n0: float = 1e-3          # atoms
    atol_g: float = 1e-12          # occupation
    dt_init: float = 1e-5          # s
    dt_max: float = 0.05           # s
    dt_min: float = 1e-12          # s
    steady_window: float = 0.1     # s
    steady_frac: float = 1e-3
    steady_abs: float = 1.0        # atoms
    sample_interval: float = 0.01  # s
    steady_checks: int = 5         # consecutive flat windows required
    n_nodes: int = 400
    n0_floor: float = 1.0          # atoms; 0 disables the nucleation seed
    max_rejects: int = 60
    snapshot_times: tuple = ()

    def __post_init__(self):
        for name in ("rtol", "atol_n0", "atol_g", "dt_init", "dt_max",
                     "dt_min", "steady_window", "steady_frac", "steady_abs",
                     "sample_interval"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_nodes < 8:
            raise ValueError("n_nodes must be at least 8")
        if self.steady_checks < 1:
            raise ValueError("steady_checks must be at least 1")
        if self.n0_floor < 0:
            raise ValueError("n0_floor must be non-negative")
        if self.dt_min > self.dt_init or self.dt_init > self.dt_max:
            raise ValueError("need dt_min <= dt_init <= dt_max")


@dataclass
class Trajectory:
    """Sampled time series plus optional full-distribution snapshots."""

    times: list = field(default_factory=list)
    n0: list = field(default_factory=list)
    n_thermal: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    fraction: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def append(self, t, n0, n_thermal, mu):
        total = n0 + n_thermal
        self.times.append(t)
        self.n0.append(n0)
        self.n_thermal.append(n_thermal)
        self.mu.append(mu)
        self.fraction.append(n0 / total if total > 0 else 0.0)

    def as_arrays(self):
        return {
            "t": np.asarray(self.times),
            "n0": np.asarray(self.n0),
            "n_thermal": np.asarray(self.n_thermal),
            "mu": np.asarray(self.mu),
            "fraction": np.asarray(self.fraction),
        }


@dataclass
class EvolveResult:
    trajectory: Trajectory
    state: SystemState
    steady: bool
    t_final: float
    t_steady: float | None
    ledger: dict
    audit_residual: float
    final_rates: ProcessRates
    stats: dict


def make_initial_state(n_initial: float, temperature: float,
                       grid: EnergyGrid, ts: TrapSpecies,
                       rtol: float = 1e-8) -> SystemState:
    """Truncated thermal distribution with no condensate.

    The fugacity is solved so the untruncated ideal-gas number equals
    n_initial (bisection); the grid itself applies the truncation.  If
    n_initial exceeds the ideal-gas capacity at this temperature the
    fugacity saturates just below 1 with a warning.
    """
    if n_initial <= 0:
        raise ValueError("n_initial must be positive")
    z = fugacity_for_number(n_initial, temperature, ts, rtol=rtol)
    g = bose_einstein(grid.nodes, temperature, z)
    g = np.where(np.isfinite(g), g, 0.0)
    from .grid import make_system_state
    return make_system_state(0.0, g, grid, ts)


def _try_step(y, h, rhs, error_norm):
    """One embedded-pair attempt from y with step h.

    Returns (accepted, y_high, norm, h_next)."""
    k = [rhs(y)]
    for i in range(1, 7):
        yi = y + (h * _DP_A[i][0]) * k[0]
        for j in range(1, i):
            if _DP_A[i][j] != 0.0:
                yi += (h * _DP_A[i][j]) * k[j]
        k.append(rhs(yi))
    # stage 7 is evaluated at the 5th-order solution
    y5 = y + (h * _DP_A[6][0]) * k[0]
    for j in range(1, 6):
        if _DP_A[6][j] != 0.0:
            y5 += (h * _DP_A[6][j]) * k[j]
    err = (h * _DP_ERR[0]) * k[0]
    for j in range(1, 7):
        if _DP_ERR[j] != 0.0:
            err += (h * _DP_ERR[j]) * k[j]
    norm = error_norm(y, y5, err)
    if norm < 1e-10:
        factor = 5.0
    else:
        factor = min(5.0, max(0.2, 0.9 * norm ** -0.2))
    return norm <= 1.0, y5, norm, h * factor


class _Evolution:
    """Owns the mutable state of one evolve() call."""

    def __init__(self, initial: SystemState, pump: PumpParams,
                 ts: TrapSpecies, cfg: IntegratorConfig,
                 ctx: RhsContext | None):
        self.grid = initial.thermal.grid
        self.pump = pump
        self.ts = ts
        self.cfg = cfg
        self.ctx = ctx if ctx is not None else make_rhs_context(
            self.grid, pump, ts)
        n = self.grid.n
        self.n = n
        self.w = self.grid.weights
        y = np.zeros(1 + n + 5)
        y[0] = initial.n0
        y[1:1 + n] = initial.thermal.rho_bar * initial.thermal.g
        self.y = y
        self.mu = tf_chemical_potential(max(initial.n0, 0.0), ts)
        self.dmu_dt = 0.0
        self.rho, _, _ = _kernels.fill_dos(self.grid.nodes, self.mu,
                                           ts.energy_quantum)
        self.live = self.grid.live_slice(self.mu)
        self.seeded = 0.0
        self.enforced = 0.0
        self.clamped = 0.0
        self.rhs_evals = 0
        self.warned_cut = False

    def rhs(self, y):
        self.rhs_evals += 1
        rates, _, _, _ = eval_rhs(y[0], y[1:1 + self.n], self.dmu_dt,
                                  self.ctx)
        w = self.w
        wtt = float(np.sum(w * rates.thermal_thermal))
        wtc = float(np.sum(w * rates.thermal_condensate))
        wtb = float(np.sum(w * rates.three_body))
        wrd = float(np.sum(w * rates.redistribution))
        dy = np.empty_like(y)
        dy[0] = rates.dn0_total
        dy[1:1 + self.n] = rates.thermal_total
        dy[1 + self.n + 0] = self.ctx.rep_delivered
        dy[1 + self.n + 1] = wtt + wtc + rates.dn0_thermal_condensate
        dy[1 + self.n + 2] = wtb + rates.dn0_three_body
        dy[1 + self.n + 3] = rates.dn0_outcoupling
        dy[1 + self.n + 4] = wrd
        return dy

    def error_norm(self, y0, y1, err):
        cfg = self.cfg
        sc0 = cfg.atol_n0 + cfg.rtol * max(abs(y0[0]), abs(y1[0]))
        total = (err[0] / sc0) ** 2
        count = 1
        live = self.live
        rho = self.rho[:live]
        mask = rho > 0.0
        if np.any(mask):
            rho_m = rho[mask]
            g = np.abs(y0[1:1 + live][mask]) / rho_m
            ge = np.abs(err[1:1 + live][mask]) / rho_m
            sc = cfg.atol_g + cfg.rtol * g
            total += float(np.sum((ge / sc) ** 2))
            count += int(mask.sum())
        return math.sqrt(total / count)

    def post_step(self, h):
        """Floor, mu refresh, truncation enforcement, positivity clamp."""
        y, cfg, grid = self.y, self.cfg, self.grid
        if y[0] < cfg.n0_floor:
            self.seeded += cfg.n0_floor - y[0]
            y[0] = cfg.n0_floor
        mu_new = tf_chemical_potential(y[0], self.ts)
        self.dmu_dt = (mu_new - self.mu) / h
        self.mu = mu_new
        self.rho, _, _ = _kernels.fill_dos(grid.nodes, mu_new,
                                           self.ts.energy_quantum)
        self.live = grid.live_slice(mu_new)
        tail = y[1 + self.live:1 + self.n]
        if tail.size and np.any(tail != 0.0):
            self.enforced += float(np.sum(self.w[self.live:] * tail))
            tail[:] = 0.0
        head = y[1:1 + self.live]
        neg = head < 0.0
        if np.any(neg):
            self.clamped += -float(np.sum(self.w[:self.live][neg]
                                          * head[neg]))
            head[neg] = 0.0
        if not self.warned_cut and mu_new > 0 and grid.eps_cut < 5.0 * mu_new:
            warnings.warn(
                "truncation energy is below 5 mu; the thermal band is "
                "squeezed against the condensate", RuntimeWarning)
            self.warned_cut = True

    def n_thermal(self):
        return float(np.sum(self.w * self.y[1:1 + self.n]))

    def state(self) -> SystemState:
        g = np.zeros(self.n)
        head = self.rho[:self.live]
        np.divide(np.maximum(self.y[1:1 + self.live], 0.0), head,
                  out=g[:self.live], where=head > 0)
        thermal = ThermalState(self.grid, g, self.rho.copy())
        return SystemState(n0=float(self.y[0]), mu=self.mu, thermal=thermal)


def step(state: SystemState, pump: PumpParams, ts: TrapSpecies,
         cfg: IntegratorConfig, dt: float | None = None,
         dmu_dt: float = 0.0):
    """Advance one accepted adaptive step from a state snapshot.

    Returns (new_state, dt_used, error_estimate).  Retries with a smaller
    step on rejection; raises StiffnessError below cfg.dt_min.
    """
    ev = _Evolution(state, pump, ts, cfg, None)
    ev.dmu_dt = dmu_dt
    h = dt if dt is not None else cfg.dt_init
    for _ in range(cfg.max_rejects):
        ok, y_new, norm, h_next = _try_step(ev.y, h, ev.rhs, ev.error_norm)
        if ok:
            ev.y = y_new
            ev.post_step(h)
            return ev.state(), h, norm
        if h_next < cfg.dt_min:
            raise StiffnessError("step size underflow", 0.0, h_next,
                                 state=ev.state())
        h = h_next
    raise StiffnessError("too many rejected steps", 0.0, h, state=ev.state())


def evolve(initial: SystemState, pump: PumpParams, ts: TrapSpecies,
           cfg: IntegratorConfig | None = None, t_max: float = 60.0,
           ctx: RhsContext | None = None) -> EvolveResult:
    """Evolve to steady state or t_max.

    Steady state: over a full steady_window the condensate number changed
    by less than steady_abs atoms or by less than steady_frac relative,
    sustained for steady_checks consecutive sampled windows (a single
    window can look flat at the crest of a growth overshoot).  While the
    condensate is still at the seed level the same test is applied to the
    thermal number instead, so the induction phase of the growth curve is
    not mistaken for equilibrium.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    wall0 = time.perf_counter()
    ev = _Evolution(initial, pump, ts, cfg, ctx)
    n = ev.n

    traj = Trajectory()
    traj.append(0.0, float(ev.y[0]), ev.n_thermal(), ev.mu)
    ring = deque()
    ring.append((0.0, float(ev.y[0]), ev.n_thermal()))
    n_tot0 = float(ev.y[0]) + ev.n_thermal()

    snaps = sorted(cfg.snapshot_times)
    snap_idx = 0
    next_sample = cfg.sample_interval

    t = 0.0
    h = cfg.dt_init
    steady = False
    t_steady = None
    flat_run = 0
    n_steps = 0
    n_rejects = 0
    rejects_run = 0
    just_rejected = False

    while t < t_max * (1.0 - 1e-12):
        h = min(h, cfg.dt_max, t_max - t)
        ok, y_new, norm, h_next = _try_step(ev.y, h, ev.rhs, ev.error_norm)
        if not ok:
            n_rejects += 1
            rejects_run += 1
            just_rejected = True
            if h_next < cfg.dt_min or rejects_run > cfg.max_rejects:
                raise StiffnessError(
                    f"step size underflow at t={t:.6g} s (dt={h_next:.3g}, "
                    f"error norm {norm:.3g})", t, h_next,
                    state=ev.state(), trajectory=traj)
            h = h_next
            continue
        rejects_run = 0
        n_steps += 1
        h_used = h
        t += h_used
        ev.y = y_new
        ev.post_step(h_used)
        # no growth immediately after a rejection; damps accept/reject cycling
        h = min(h_next, h_used) if just_rejected else h_next
        just_rejected = False

        while snap_idx < len(snaps) and t >= snaps[snap_idx]:
            traj.snapshot_times.append(t)
            traj.snapshots.append(ev.state())
            snap_idx += 1

        if t >= next_sample or t >= t_max:
            n0_now = float(ev.y[0])
            nt_now = ev.n_thermal()
            traj.append(t, n0_now, nt_now, ev.mu)
            ring.append((t, n0_now, nt_now))
            next_sample = t + cfg.sample_interval
            while len(ring) > 2 and ring[1][0] <= t - cfg.steady_window:
                ring.popleft()
            if ring[0][0] <= t - cfg.steady_window:
                n0s = [r[1] for r in ring]
                dn0 = max(n0s) - min(n0s)
                flat = (dn0 < cfg.steady_abs
                        or dn0 < cfg.steady_frac * max(n0s))
                if flat and max(n0s) <= max(10.0 * cfg.n0_floor, 10.0):
                    nts = [r[2] for r in ring]
                    dnt = max(nts) - min(nts)
                    flat = dnt < max(cfg.steady_abs,
                                     cfg.steady_frac * max(nts))
                flat_run = flat_run + 1 if flat else 0
                if flat_run >= cfg.steady_checks:
                    steady = True
                    t_steady = t
                    break

    if traj.times[-1] < t:
        traj.append(t, float(ev.y[0]), ev.n_thermal(), ev.mu)

    n_tot = float(ev.y[0]) + ev.n_thermal()
    ledger = {
        "replenishment": float(ev.y[1 + n + 0]),
        "collision_evaporation": float(ev.y[1 + n + 1]),
        "three_body": float(ev.y[1 + n + 2]),
        "outcoupled": float(ev.y[1 + n + 3]),
        "redistribution_boundary": float(ev.y[1 + n + 4]),
        "truncation_enforced": -ev.enforced,
        "clamp_restored": ev.clamped,
        "seed_injected": ev.seeded,
    }
    audit = (n_tot - n_tot0) - sum(ledger.values())
    final_rates, _, _, _ = eval_rhs(float(ev.y[0]), ev.y[1:1 + n],
                                    ev.dmu_dt, ev.ctx)
    stats = {
        "n_steps": n_steps,
        "n_rejected": n_rejects,
        "n_rhs_evals": ev.rhs_evals,
        "wall_time": time.perf_counter() - wall0,
    }
    return EvolveResult(
        trajectory=traj, state=ev.state(), steady=steady, t_final=t,
        t_steady=t_steady, ledger=ledger, audit_residual=audit,
        final_rates=final_rates, stats=stats)
