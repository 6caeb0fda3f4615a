"""Unit conventions and physical constants.

Energies are quoted in wavenumbers (cm^-1) at the user-facing interfaces and
converted to angular frequencies (rad/fs) internally, with hbar = 1 so that
energy and frequency are interchangeable. Times are in fs throughout.
"""

import math

# Speed of light in cm/fs.
C_CM_PER_FS = 2.99792458e-5

# 1 cm^-1 expressed as an angular frequency in rad/fs.
CM1_TO_RADFS = 2.0 * math.pi * C_CM_PER_FS

# Boltzmann constant in cm^-1 per Kelvin.
KB_CM1_PER_K = 0.69503480


def cm1_to_radfs(energy_cm1: float) -> float:
    """Convert an energy in cm^-1 to an angular frequency in rad/fs."""
    return energy_cm1 * CM1_TO_RADFS


def radfs_to_cm1(omega_radfs: float) -> float:
    """Convert an angular frequency in rad/fs to an energy in cm^-1."""
    return omega_radfs / CM1_TO_RADFS


def thermal_beta_fs(temperature_k: float) -> float:
    """Inverse temperature 1/(k_B T) in fs (i.e. 1/(rad/fs))."""
    if temperature_k <= 0.0:
        raise ValueError(f"temperature must be positive, got {temperature_k}")
    return 1.0 / cm1_to_radfs(KB_CM1_PER_K * temperature_k)
