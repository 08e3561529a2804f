"""Semiclassical density of states above a Thomas-Fermi condensate.

In the Hartree-Fock picture thermal atoms move in the effective potential
V_eff = V_trap + 2 g n_c, whose minimum equals the chemical potential mu on
the condensate surface.  Working in the shifted energy eps_bar = eps - mu,
the density of states splits into a part supported inside the condensate
(I-) and a part outside it (I+), both elementary integrals of
sqrt(eps - V_eff) over the trap.
"""

from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .constants import HBAR
from .trap import TrapSpecies, trap_potential


def harmonic_dos(eps, ts: TrapSpecies):
    """Bare harmonic-trap density of states eps^2 / (2 (hbar omega_bar)^3)."""
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("energy must be non-negative")
    out = eps * eps / (2.0 * ts.energy_quantum**3)
    return out if out.ndim else float(out)


def i_minus(eps_bar: float, mu: float, ts: TrapSpecies) -> float:
    """Inner (condensate-region) part of the shifted DOS, dimensionless."""
    _check_domain(eps_bar, mu)
    return _kernels.ib_minus(eps_bar, mu, ts.energy_quantum)


def i_plus(eps_bar: float, mu: float, ts: TrapSpecies) -> float:
    """Outer part of the shifted DOS, dimensionless."""
    _check_domain(eps_bar, mu)
    return _kernels.ib_plus(eps_bar, mu, ts.energy_quantum)


def shifted_dos(eps_bar, mu: float, ts: TrapSpecies):
    """Density of states 2/(pi hbar omega_bar) (I- + I+) at eps_bar, 1/J.

    Reduces to the harmonic result for mu = 0.  Vanishes at eps_bar = 0
    (like eps_bar^(3/2) when mu > 0: the effective potential has its
    minimum on the condensate surface, a two-dimensional set).
    """
    arr = np.atleast_1d(np.asarray(eps_bar, dtype=float))
    _check_domain(float(arr.min()) if arr.size else 0.0, mu)
    rho, _, _ = _kernels.fill_dos(arr, mu, ts.energy_quantum)
    return rho if np.ndim(eps_bar) else float(rho[0])


def shifted_dos_parts(eps_bar: np.ndarray, mu: float, ts: TrapSpecies):
    """(rho_bar, I-, I+) arrays on the given nodes; shares one evaluation."""
    eps_bar = np.ascontiguousarray(eps_bar, dtype=float)
    _check_domain(float(eps_bar.min()), mu)
    return _kernels.fill_dos(eps_bar, mu, ts.energy_quantum)


def weighted_dos(eps_bar, mu: float, dmu_dt: float, ts: TrapSpecies):
    """Redistribution weight 2/(pi hbar omega_bar) (I- - I+) dmu/dt, 1/(J s).

    Appears in the advection term that bookkeeps the motion of the shifted
    energy origin as the chemical potential evolves.
    """
    arr = np.atleast_1d(np.asarray(eps_bar, dtype=float))
    _check_domain(float(arr.min()) if arr.size else 0.0, mu)
    _, im, ip = _kernels.fill_dos(arr, mu, ts.energy_quantum)
    out = 2.0 / (math.pi * ts.energy_quantum) * (im - ip) * dmu_dt
    return out if np.ndim(eps_bar) else float(out[0])


def local_dos(eps, r, mu: float, ts: TrapSpecies):
    """Local density of states m^(3/2)/(sqrt2 pi^2 hbar^3) sqrt(eps - V_eff).

    eps is the unshifted energy (J); r a position or array of positions.
    V_eff = V_trap + 2 g n_c equals 2 mu - V_trap inside the condensate.
    """
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0):
        raise ValueError("energy must be non-negative")
    v = trap_potential(r, ts)
    v_eff = np.where(v < mu, 2.0 * mu - v, v)
    c = ts.mass**1.5 / (math.sqrt(2.0) * math.pi**2 * HBAR**3)
    out = c * np.sqrt(np.clip(eps - v_eff, 0.0, None))
    return out if out.ndim else float(out)


def thermal_density(r, eps_bar: np.ndarray, g: np.ndarray,
                    weights: np.ndarray, mu: float, ts: TrapSpecies):
    """Thermal cloud density at r from a gridded occupation, m^-3.

    n_t(r) = sum_i w_i g_i rho_local(eps_bar_i + mu, r); the same grid
    weights are used as in every other number integral.
    """
    v = trap_potential(r, ts)
    ueff = np.abs(mu - np.asarray(v, dtype=float))
    c = ts.mass**1.5 / (math.sqrt(2.0) * math.pi**2 * HBAR**3)
    arg = eps_bar - ueff[..., None]
    dens = c * np.sqrt(np.clip(arg, 0.0, None))
    out = np.sum(weights * g * dens, axis=-1)
    return out if out.ndim else float(out)


def _check_domain(eps_bar_min: float, mu: float):
    if eps_bar_min < 0:
        raise ValueError("shifted energy must be non-negative")
    if mu < 0:
        raise ValueError("chemical potential must be non-negative")
