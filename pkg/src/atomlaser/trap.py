"""Harmonic trap geometry and Thomas-Fermi condensate relations.

All spatial integrals in the package are done in frequency-scaled isotropic
coordinates u_i = x_i * omega_i / omega_bar, which preserve volume elements
and turn the cylindrical trap into an isotropic one with frequency
omega_bar = (omega_r^2 omega_z)^(1/3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import A_RB87, HBAR, K_B, M_RB87, ZETA3


@dataclass(frozen=True)
class TrapSpecies:
    """A single atomic species in a cylindrically symmetric harmonic trap.

    Parameters
    ----------
    omega_r, omega_z : float
        Radial and axial angular trap frequencies, rad/s.
    mass : float
        Atomic mass, kg.
    scattering_length : float
        s-wave scattering length, m.
    """

    omega_r: float
    omega_z: float
    mass: float = M_RB87
    scattering_length: float = A_RB87

    def __post_init__(self):
        if self.omega_r <= 0 or self.omega_z <= 0:
            raise ValueError("trap frequencies must be positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.scattering_length <= 0:
            raise ValueError("scattering length must be positive")

    @property
    def omega_bar(self) -> float:
        """Geometric-mean angular frequency, rad/s."""
        return (self.omega_r**2 * self.omega_z) ** (1.0 / 3.0)

    @property
    def energy_quantum(self) -> float:
        """hbar * omega_bar, the natural energy unit of the trap, J."""
        return HBAR * self.omega_bar

    @property
    def osc_length(self) -> float:
        """Harmonic oscillator length sqrt(hbar / m omega_bar), m."""
        return math.sqrt(HBAR / (self.mass * self.omega_bar))

    @property
    def g_int(self) -> float:
        """Contact interaction strength 4 pi hbar^2 a / m, J m^3."""
        return 4.0 * math.pi * HBAR**2 * self.scattering_length / self.mass


def rb87_trap(omega_r_hz: float = 110.0, omega_z_hz: float = 14.0) -> TrapSpecies:
    """Rb-87 in the reference cigar trap (frequencies are in cyclic Hz)."""
    return TrapSpecies(omega_r=2.0 * math.pi * omega_r_hz,
                       omega_z=2.0 * math.pi * omega_z_hz)


def trap_potential(r, ts: TrapSpecies):
    """Harmonic potential at position(s) r = (x, y, z), J.

    r may be a length-3 sequence or an array with trailing axis of size 3.
    """
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    return 0.5 * ts.mass * (ts.omega_r**2 * (x * x + y * y)
                            + ts.omega_z**2 * z * z)


# ---------------------------------------------------------------------------
# Thomas-Fermi relations
# ---------------------------------------------------------------------------

def tf_chemical_potential(n0: float, ts: TrapSpecies) -> float:
    """Thomas-Fermi chemical potential of a condensate of n0 atoms, J.

    mu = (hbar omega_bar / 2) * (15 n0 a / a_ho)^(2/5); returns 0 for n0 = 0.
    """
    if n0 < 0:
        raise ValueError("condensate number must be non-negative")
    if n0 == 0:
        return 0.0
    x = 15.0 * n0 * ts.scattering_length / ts.osc_length
    return 0.5 * ts.energy_quantum * x**0.4


def tf_condensate_number(mu: float, ts: TrapSpecies) -> float:
    """Inverse of tf_chemical_potential: atom number at chemical potential mu."""
    if mu < 0:
        raise ValueError("chemical potential must be non-negative")
    if mu == 0:
        return 0.0
    x = (2.0 * mu / ts.energy_quantum) ** 2.5
    return x * ts.osc_length / (15.0 * ts.scattering_length)


def tf_radius(mu: float, ts: TrapSpecies) -> float:
    """Thomas-Fermi radius in scaled isotropic coordinates, m."""
    if mu < 0:
        raise ValueError("chemical potential must be non-negative")
    return math.sqrt(2.0 * mu / (ts.mass * ts.omega_bar**2))


def condensate_density(r, mu: float, ts: TrapSpecies):
    """Thomas-Fermi condensate density max(mu - V(r), 0) / g at r, m^-3."""
    v = trap_potential(r, ts)
    return np.clip(mu - v, 0.0, None) / ts.g_int


def condensate_shell_number(u_minus: float, mu: float, n0: float) -> float:
    """Condensate atoms inside the shell where the mean-field shift is small.

    Integrates the Thomas-Fermi density over the region where the effective
    potential above the condensate, ueff = mu - V(r), does not exceed
    u_minus.  That region is the outer shell of the inverted parabola, and
    the closed form is

        n0 * (1 - 5/2 (1-w)^(3/2) + 3/2 (1-w)^(5/2)),  w = min(u_minus/mu, 1).
    """
    if u_minus < 0:
        raise ValueError("energy window must be non-negative")
    if n0 <= 0:
        return 0.0
    if mu <= 0 or u_minus >= mu:
        return n0
    q = 1.0 - u_minus / mu
    return n0 * (1.0 - math.sqrt(q) * q * (2.5 - 1.5 * q))


def critical_temperature(n: float, ts: TrapSpecies) -> float:
    """Ideal-gas condensation temperature for n harmonically trapped atoms, K."""
    if n <= 0:
        raise ValueError("atom number must be positive")
    return ts.energy_quantum / K_B * (n / ZETA3) ** (1.0 / 3.0)
