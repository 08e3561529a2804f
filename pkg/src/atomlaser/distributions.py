"""Equilibrium occupation functions and fugacity bookkeeping."""

from __future__ import annotations

import warnings

import numpy as np

from .constants import K_B, ZETA3
from .trap import TrapSpecies

FUGACITY_CAP = 1.0 - 1e-12


def bose_einstein(eps, temperature: float, fugacity: float = 1.0):
    """Bose-Einstein occupation 1 / (exp(eps / kT) / z - 1).

    eps may be a scalar or array (J).  Occupation diverges at eps = 0 when
    z = 1; that point is returned as inf.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if not 0.0 < fugacity <= 1.0:
        raise ValueError("fugacity must lie in (0, 1]")
    x = np.exp(np.asarray(eps, dtype=float) / (K_B * temperature)) / fugacity
    with np.errstate(divide="ignore"):
        out = 1.0 / (x - 1.0)
    return out if out.ndim else float(out)


def boltzmann(eps, temperature: float, fugacity: float):
    """Classical limit z * exp(-eps / kT) of the occupation function."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return fugacity * np.exp(-np.asarray(eps, dtype=float) / (K_B * temperature))


def li3(z: float, rtol: float = 1e-14) -> float:
    """Polylogarithm Li_3(z) for 0 <= z <= 1 by direct series summation."""
    if not 0.0 <= z <= 1.0:
        raise ValueError("series evaluated only on [0, 1]")
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return ZETA3  # series tail decays too slowly at the endpoint
    total, term, k = 0.0, z, 1
    while True:
        add = term / (k * k * k)
        total += add
        if add < rtol * total or k >= 400000:
            return total
        k += 1
        term *= z


def ideal_gas_number(fugacity: float, temperature: float, ts: TrapSpecies) -> float:
    """Untruncated thermal atom number (kT / hbar omega_bar)^3 Li_3(z)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return (K_B * temperature / ts.energy_quantum) ** 3 * li3(fugacity)


def fugacity_for_number(n: float, temperature: float, ts: TrapSpecies,
                        rtol: float = 1e-8) -> float:
    """Fugacity z such that the untruncated ideal-gas number equals n.

    Solved by bisection.  If n exceeds the maximum thermal number at this
    temperature (the gas would be condensed) the fugacity is capped just
    below one and a warning is issued.
    """
    if n <= 0:
        raise ValueError("atom number must be positive")
    n_max = ideal_gas_number(FUGACITY_CAP, temperature, ts)
    if n >= n_max:
        warnings.warn(
            f"requested thermal number {n:.3e} exceeds the critical number "
            f"{n_max:.3e} at T={temperature * 1e9:.1f} nK; fugacity capped",
            stacklevel=2)
        return FUGACITY_CAP
    lo, hi = 0.0, FUGACITY_CAP
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if ideal_gas_number(mid, temperature, ts) < n:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * max(lo, 1e-300):
            break
    return 0.5 * (lo + hi)
