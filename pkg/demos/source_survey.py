# Phase-space flux for the bundled survey of experimental beam sources,
# and optionally a full steady-state solve of the strongest one.  The
# closed-form figure of merit kappa collapses flux and temperature into
# a single number; only sources with kappa above ~1e-3 /s can sustain a
# sizable condensate against three-body loss.
#
#   python demos/source_survey.py [--solve] [--catalog FILE]

import argparse

from atomlaser.constants import K_B
from atomlaser.experiments import (evaluate_sources, optimize_eps_cut,
                                   solve_steady)
from atomlaser.integrator import IntegratorConfig
from atomlaser.rates import PumpParams
from atomlaser.runner import load_catalog, packaged_catalog_path
from atomlaser.trap import rb87_trap

parser = argparse.ArgumentParser(description=__doc__)
parser.add_argument("--solve", action="store_true",
                    help="solve the strongest source to steady state "
                         "(a few minutes)")
parser.add_argument("--catalog", help="alternative catalog CSV")
args = parser.parse_args()

ts = rb87_trap()
catalog = load_catalog(args.catalog or packaged_catalog_path())
verdicts = evaluate_sources(catalog, ts)

print(f"{'source':<44} {'flux [1/s]':>10} {'T [K]':>8} "
      f"{'kappa [1/s]':>11} {'viable':>6}")
for v in verdicts:
    note = "(comparison)" if v.comparison_only else ("yes" if v.passes
                                                     else "no")
    print(f"{v.name:<44} {v.flux:>10.2g} {v.temperature:>8.2g} "
          f"{v.kappa:>11.2g} {note:>6}")

if args.solve:
    strongest = max((v for v in verdicts if not v.comparison_only),
                    key=lambda v: v.kappa)
    print(f"\nsolving steady state for: {strongest.name}")
    kbt = K_B * strongest.temperature
    pump = PumpParams(flux=strongest.flux,
                      temperature=strongest.temperature, outcoupling=0.3)
    cfg = IntegratorConfig(rtol=1e-6, n_nodes=200)
    res = optimize_eps_cut(pump, ts, cfg, (0.3 * kbt, 0.9 * kbt),
                           n_pre=4, rel_width=0.05)
    best = res.best
    print(f"optimal truncation: {res.eps_cut / kbt:.3f} kBT")
    print(f"steady N0 = {best.n0:.4g}, condensate fraction "
          f"{best.fraction:.3f}, kappa = {best.kappa:.3g} /s")
