"""Physical constants and default species data (SI units throughout)."""

# ---------------------------------------------------------------------------
# fundamental constants (CODATA 2018 exact values)
# ---------------------------------------------------------------------------
HBAR = 1.054571817e-34      # reduced Planck constant, J s
K_B = 1.380649e-23          # Boltzmann constant, J / K

ZETA3 = 1.2020569031595942  # Riemann zeta(3); ideal-gas condensation number

# ---------------------------------------------------------------------------
# rubidium-87 defaults
# ---------------------------------------------------------------------------
M_RB87 = 1.44316e-25        # atomic mass, kg
A_RB87 = 5.29e-9            # s-wave scattering length, m (100 Bohr radii)
L3_RB87 = 5.8e-42           # three-body recombination constant, m^6 / s
