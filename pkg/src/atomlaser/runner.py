"""Execute a validated configuration and write result files.

Every mode writes a summary.json plus mode-specific delimited tables into
the output directory.  Column names carry units (t_s, mu_J, ...); row
order follows input order; failed points in multi-point modes go to an
errors.tsv sidecar while the run continues.  Apart from the provenance
timestamp, re-running the same config reproduces the outputs exactly.
"""

from __future__ import annotations

import csv
import importlib.resources
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, config_hash, emit_config
from .constants import K_B
from .dos import harmonic_dos, shifted_dos_parts
from .experiments import (SweepSpec, classify_group, evaluate_sources,
                          kappa_scan, optimize_eps_cut, solve_steady, sweep)
from .grid import make_system_state, uniform_grid
from .integrator import make_initial_state
from .rates import (assemble_rhs, collision_balance_residual,
                    exchange_balance_residual, replenishment_coupling,
                    replenishment_profile, thermal_thermal_term)
from .trap import tf_chemical_potential


class SolverFailure(RuntimeError):
    """A run that could not produce any result."""


@dataclass(frozen=True)
class RunResult:
    out_dir: Path
    summary: dict
    files: tuple


_POINT_COLUMNS = (
    "index", "Phi_per_s", "T_K", "eps_cut_J", "gamma_per_s", "kappa_per_s",
    "cut_ratio", "N0", "N_T", "fraction", "mu_J", "t_steady_s",
    "flux_below_cut_per_s", "steady", "group",
)


def _point_row(i, p):
    return (i, p.flux, p.temperature, p.eps_cut, p.gamma, p.kappa,
            p.cut_ratio, p.n0, p.n_thermal, p.fraction, p.mu, p.t_steady,
            p.flux_below_cut, p.steady, p.group or "")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _write_table(path: Path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t", lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _write_summary(path: Path, summary: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path


def _base_summary(cfg: RunConfig) -> dict:
    return {
        "mode": cfg.mode,
        "provenance": {
            "config_hash": config_hash(cfg),
            "version": __version__,
            "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                           time.gmtime()),
        },
    }


def run(cfg: RunConfig, workers: int = 1, seed: int | None = None,
        out_dir=None) -> RunResult:
    """Execute cfg and write its outputs.  Raises SolverFailure when no
    result at all could be produced."""
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    config_path = out / "config.toml"
    config_path.write_text(emit_config(cfg), encoding="utf-8")
    files.append(config_path)
    summary = _base_summary(cfg)

    handler = {
        "simulate": _run_simulate,
        "sweep": _run_sweep,
        "optimize-cut": _run_optimize,
        "kappa-scan": _run_scan,
        "sources": _run_sources,
        "validate": _run_validate,
    }[cfg.mode]
    handler(cfg, out, files, summary, workers=workers, seed=seed)

    files.append(_write_summary(out / "summary.json", summary))
    return RunResult(out_dir=out, summary=summary, files=tuple(files))


def _run_simulate(cfg, out, files, summary, workers=1, seed=None):
    try:
        point, res = solve_steady(cfg.pump, cfg.ts, cfg.eps_cut,
                                  cfg.integrator,
                                  n_initial=cfg.pump.source_number,
                                  t_max=cfg.t_max)
    except Exception as exc:
        raise SolverFailure(f"simulate failed: {exc!r}") from exc

    arrs = res.trajectory.as_arrays()
    files.append(_write_table(
        out / "trajectory.tsv", ("t_s", "N0", "N_T", "mu_J", "fraction"),
        zip(arrs["t"], arrs["n0"], arrs["n_thermal"], arrs["mu"],
            arrs["fraction"])))

    if cfg.snapshots:
        for t_snap, state in zip(res.trajectory.snapshot_times,
                                 res.trajectory.snapshots):
            g = state.thermal.grid
            name = f"snapshot_{t_snap:08.3f}s.tsv"
            files.append(_write_table(
                out / name, ("eps_bar_J", "rho_bar_per_J", "occupation"),
                zip(g.nodes, state.thermal.rho_bar, state.thermal.g)))

    w = res.state.thermal.grid.weights
    rates = res.final_rates
    summary["result"] = {
        "steady": res.steady,
        "t_steady_s": res.t_steady,
        "t_final_s": res.t_final,
        "N0": res.state.n0,
        "N_T": res.state.thermal.number(),
        "fraction": res.state.condensate_fraction,
        "mu_J": res.state.mu,
        "eps_cut_J": cfg.eps_cut,
        "kappa_per_s": point.kappa,
        "flux_below_cut_per_s": point.flux_below_cut,
        "number_rates_per_s": {
            "thermal_thermal": float(np.sum(w * rates.thermal_thermal)),
            "thermal_condensate": float(
                np.sum(w * rates.thermal_condensate)
                + rates.dn0_thermal_condensate),
            "three_body": float(np.sum(w * rates.three_body)
                                + rates.dn0_three_body),
            "replenishment": float(np.sum(w * rates.replenishment)),
            "redistribution": float(np.sum(w * rates.redistribution)),
            "outcoupling": rates.dn0_outcoupling,
        },
        "ledger": dict(res.ledger),
        "audit_residual": res.audit_residual,
    }
    summary["stats"] = dict(res.stats)


def _sweep_spec(cfg) -> SweepSpec:
    exp = cfg.experiment
    parameter = exp["parameter"]
    key = {"Phi": "values_per_s", "gamma": "values_per_s",
           "T": "values_nK", "eps_cut": "values_kBT"}[parameter]
    values = exp[key]
    if parameter == "T":
        values = tuple(v * 1e-9 for v in values)
    elif parameter == "eps_cut":
        values = tuple(v * K_B * cfg.pump.temperature for v in values)
    return SweepSpec(varying=parameter, values=values, pump=cfg.pump,
                     ts=cfg.ts, cfg=cfg.integrator, eps_cut=cfg.eps_cut,
                     n_initial=exp["n_initial"], t_max=cfg.t_max)


def _emit_points(out, files, summary, points):
    """Write the points table and failure sidecar; summarize counts."""
    rows = [_point_row(i, p) for i, p in enumerate(points)]
    files.append(_write_table(out / "points.tsv", _POINT_COLUMNS, rows))
    failures = [(i, p.error) for i, p in enumerate(points) if p.failed]
    if failures:
        files.append(_write_table(out / "errors.tsv", ("index", "error"),
                                  failures))
    summary["points_total"] = len(points)
    summary["points_failed"] = len(failures)
    summary["points_unsettled"] = sum(
        1 for p in points if not p.failed and not p.steady)
    if all(p.failed for p in points):
        raise SolverFailure("all points failed")


def _run_sweep(cfg, out, files, summary, workers=1, seed=None):
    spec = _sweep_spec(cfg)
    points = sweep(spec, workers=workers)
    summary["parameter"] = spec.varying
    _emit_points(out, files, summary, points)


def _run_optimize(cfg, out, files, summary, workers=1, seed=None):
    exp = cfg.experiment
    kbt = K_B * cfg.pump.temperature
    bracket = tuple(b * kbt for b in exp["bracket_kBT"])
    try:
        opt = optimize_eps_cut(cfg.pump, cfg.ts, cfg.integrator, bracket,
                               n_pre=exp["n_pre"],
                               rel_width=exp["rel_width"],
                               n_initial=exp["n_initial"],
                               t_max=cfg.t_max)
    except Exception as exc:
        raise SolverFailure(f"optimize failed: {exc!r}") from exc
    _emit_points(out, files, summary, list(opt.points))
    summary["result"] = {
        "eps_cut_J": opt.eps_cut,
        "eps_cut_kBT": opt.eps_cut / kbt,
        "N0": opt.n0,
        "interior_max": opt.interior_max,
        "group": classify_group(opt.eps_cut / kbt),
    }


def _run_scan(cfg, out, files, summary, workers=1, seed=None):
    exp = cfg.experiment
    points = kappa_scan(
        (exp["Phi_min_per_s"], exp["Phi_max_per_s"]),
        (exp["T_min_nK"] * 1e-9, exp["T_max_nK"] * 1e-9),
        (exp["n_Phi"], exp["n_T"]), cfg.pump, cfg.ts, cfg.integrator,
        bracket_kbt=tuple(exp["bracket_kBT"]), n_pre=exp["n_pre"],
        n_initial=exp["n_initial"], t_max=cfg.t_max, workers=workers)
    _emit_points(out, files, summary, points)
    groups = {}
    for p in points:
        if not p.failed and p.group:
            groups[p.group] = groups.get(p.group, 0) + 1
    summary["groups"] = groups


def packaged_catalog_path() -> Path:
    return Path(importlib.resources.files("atomlaser.data")
                .joinpath("source_catalog.csv"))


def load_catalog(path) -> list:
    """Rows (name, flux, T[, comparison_only]) from a delimited catalog
    with header name,phi_per_s,T_K[,comparison_only]."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"name", "phi_per_s", "T_K"}
        if reader.fieldnames is None or not required.issubset(
                reader.fieldnames):
            raise ValueError(
                "catalog must have columns name, phi_per_s, T_K")
        for rec in reader:
            row = [rec["name"], float(rec["phi_per_s"]), float(rec["T_K"])]
            if "comparison_only" in rec and rec["comparison_only"]:
                row.append(rec["comparison_only"].strip().lower()
                           in ("true", "1", "yes"))
            rows.append(tuple(row))
    return rows


def _run_sources(cfg, out, files, summary, workers=1, seed=None):
    exp = cfg.experiment
    path = exp["catalog"] or packaged_catalog_path()
    try:
        catalog = load_catalog(path)
    except (OSError, ValueError, KeyError) as exc:
        raise SolverFailure(f"catalog unreadable: {exc}") from exc
    verdicts = evaluate_sources(catalog, cfg.ts,
                                threshold=exp["threshold_per_s"])
    rows = [(v.name, v.flux, v.temperature, v.kappa, v.passes,
             v.comparison_only) for v in verdicts]
    files.append(_write_table(
        out / "sources.tsv",
        ("name", "phi_per_s", "T_K", "kappa_per_s", "passes",
         "comparison_only"), rows))
    summary["threshold_per_s"] = exp["threshold_per_s"]
    summary["passing"] = [v.name for v in verdicts if v.passes]
    summary["catalog_size"] = len(verdicts)


def _run_validate(cfg, out, files, summary, workers=1, seed=None):
    checks = run_invariant_checks(cfg, seed=seed)
    files.append(_write_table(
        out / "checks.tsv", ("check", "passed", "measure", "tolerance"),
        checks))
    summary["checks"] = {name: passed for name, passed, _, _ in checks}
    summary["passed"] = all(passed for _, passed, _, _ in checks)


def run_invariant_checks(cfg: RunConfig, seed: int | None = None) -> list:
    """Fast structural invariants of the model on this config's grid and
    parameters, without a time integration.

    Returns rows (name, passed, measure, tolerance)."""
    rng = np.random.default_rng(0 if seed is None else seed)
    ts, pump = cfg.ts, cfg.pump
    grid = uniform_grid(cfg.eps_cut, cfg.integrator.n_nodes)
    checks = []

    def record(name, measure, tol):
        checks.append((name, bool(measure <= tol), float(measure),
                       float(tol)))

    # density of states vanishes at the condensate edge under interactions
    mu = tf_chemical_potential(1e5, ts)
    rho, _, _ = shifted_dos_parts(grid.nodes, mu, ts)
    record("dos_zero_at_origin", abs(rho[0]), 0.0)

    # without a condensate the shifted DOS is the bare harmonic one
    rho0, _, _ = shifted_dos_parts(grid.nodes, 0.0, ts)
    bare = harmonic_dos(grid.nodes, ts)
    err = np.max(np.abs(rho0[1:] - bare[1:]) / bare[1:])
    record("dos_harmonic_limit", err, 1e-10)

    # end-corrected weights integrate a cubic at their design order h^3
    exact = cfg.eps_cut**4 / 4.0
    err = abs(np.sum(grid.weights * grid.nodes**3) - exact) / exact
    record("quadrature_cubic", err, 20.0 * (grid.n - 1) ** -3 + 1e-13)

    # binary collisions conserve atom number whenever no product can land
    # above the grid top: support confined to the lower half
    g = rng.uniform(0.0, 2.0, grid.n)
    g[0] = 0.0
    g[grid.n // 2:] = 0.0
    state = make_system_state(1e5, g, grid, ts)
    out_tt = thermal_thermal_term(state, ts)
    scale = np.sum(np.abs(out_tt)) * grid.spacing + 1e-300
    record("collision_number_conservation",
           abs(np.sum(out_tt) * grid.spacing) / scale, 1e-8)

    # equilibrium occupations are stationary under both collision terms
    record("collision_detailed_balance",
           collision_balance_residual(grid, pump.temperature, 0.9, ts),
           1e-6)
    record("exchange_detailed_balance",
           exchange_balance_residual(grid, pump.temperature, 1e5, ts),
           1e-6)

    # source term delivers at most the full source flux, never negative
    gamma_rep = replenishment_coupling(pump, ts)
    rep = replenishment_profile(grid, pump, ts)
    delivered = float(np.sum(grid.weights * rep))
    ok_lower = 0.0 if delivered >= 0 else abs(delivered)
    record("replenishment_non_negative", ok_lower, 0.0)
    record("replenishment_bounded",
           max(delivered - pump.flux, 0.0) / max(pump.flux, 1e-300), 1e-12)
    record("replenishment_coupling_positive",
           0.0 if gamma_rep >= 0 else 1.0, 0.0)

    # the full right-hand side is finite on a generic state
    init = make_initial_state(pump.source_number, pump.temperature, grid,
                              ts)
    rates = assemble_rhs(init, pump, ts)
    vals = np.concatenate([rates.thermal_total,
                           [rates.dn0_total, rates.tc_gain_above_grid]])
    record("rhs_finite", 0.0 if np.all(np.isfinite(vals)) else 1.0, 0.0)
    return checks
