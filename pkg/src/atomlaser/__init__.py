"""Quantum kinetic model of a continuously replenished atom laser.

A truncated thermal cloud in shifted energy coordinates feeds a
Thomas-Fermi condensate through binary collisions; evaporation, three-body
loss, replenishment from a thermal source and condensate outcoupling close
the number budget.
"""

__version__ = "0.1.0"

from .config import (ConfigError, RunConfig, apply_overrides, config_hash,
                     emit_config, parse_config, parse_config_file)
from .constants import A_RB87, HBAR, K_B, L3_RB87, M_RB87
from .distributions import (bose_einstein, boltzmann, fugacity_for_number,
                            ideal_gas_number, li3)
from .dos import (harmonic_dos, local_dos, shifted_dos, shifted_dos_parts,
                  thermal_density, weighted_dos)
from .experiments import (OptimizeResult, SourceVerdict, SteadyPoint,
                          SweepSpec, classify_group, compute_kappa,
                          evaluate_sources, flux_for_kappa, kappa_scan,
                          monotone_within, optimize_eps_cut,
                          phase_space_density, regrid_state, solve_steady,
                          sweep)
from .grid import (EnergyGrid, SystemState, ThermalState,
                   evaporation_enforcement, gregory_weights,
                   make_system_state, uniform_grid)
from .integrator import (EvolveResult, IntegratorConfig, StiffnessError,
                         Trajectory, evolve, make_initial_state, step)
from .rates import (ProcessRates, ProcessToggles, PumpParams, RhsContext,
                    assemble_rhs, collision_balance_residual,
                    collision_constant, exchange_balance_residual,
                    make_rhs_context, redistribution_term,
                    replenishment_coupling, replenishment_profile,
                    source_fugacity, thermal_condensate_term,
                    thermal_thermal_term, three_body_density_moments,
                    three_body_term)
from .runner import (RunResult, SolverFailure, load_catalog,
                     packaged_catalog_path, run, run_invariant_checks)
from .trap import (TrapSpecies, condensate_density, condensate_shell_number,
                   critical_temperature, rb87_trap, tf_chemical_potential,
                   tf_condensate_number, tf_radius, trap_potential)

__all__ = [
    "A_RB87", "HBAR", "K_B", "L3_RB87", "M_RB87",
    "bose_einstein", "boltzmann", "fugacity_for_number",
    "ideal_gas_number", "li3",
    "harmonic_dos", "local_dos", "shifted_dos", "shifted_dos_parts",
    "thermal_density", "weighted_dos",
    "EnergyGrid", "SystemState", "ThermalState", "evaporation_enforcement",
    "gregory_weights", "make_system_state", "uniform_grid",
    "EvolveResult", "IntegratorConfig", "StiffnessError", "Trajectory",
    "evolve", "make_initial_state", "step",
    "ProcessRates", "ProcessToggles", "PumpParams", "RhsContext",
    "assemble_rhs", "collision_balance_residual", "collision_constant",
    "exchange_balance_residual", "make_rhs_context", "redistribution_term",
    "replenishment_coupling", "replenishment_profile", "source_fugacity",
    "thermal_condensate_term", "thermal_thermal_term",
    "three_body_density_moments", "three_body_term",
    "OptimizeResult", "SourceVerdict", "SteadyPoint", "SweepSpec",
    "classify_group", "compute_kappa", "evaluate_sources", "flux_for_kappa",
    "kappa_scan", "monotone_within", "optimize_eps_cut",
    "phase_space_density", "regrid_state", "solve_steady", "sweep",
    "ConfigError", "RunConfig", "apply_overrides", "config_hash",
    "emit_config", "parse_config", "parse_config_file",
    "RunResult", "SolverFailure", "load_catalog", "packaged_catalog_path",
    "run", "run_invariant_checks",
    "TrapSpecies", "condensate_density", "condensate_shell_number",
    "critical_temperature", "rb87_trap", "tf_chemical_potential",
    "tf_condensate_number", "tf_radius", "trap_potential",
    "__version__",
]
