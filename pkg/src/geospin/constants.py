"""Physical and geodetic reference constants (SI units throughout)."""

from dataclasses import dataclass
import math


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34  # J s
    mu_N: float = 5.0507837e-27  # J/T, nuclear magneton
    mu_B: float = 9.2740100e-24  # J/T, Bohr magneton
    k_B: float = 1.380649e-23  # J/K
    GM_earth: float = 3.986004418e14  # m^3/s^2
    omega_earth: float = 7.2921159e-5  # rad/s, sidereal rotation rate
    sidereal_day: float = 86164.1  # s


CONSTANTS = PhysicalConstants()

# Geomagnetic reference radius (WMM / IGRF convention).
REFERENCE_RADIUS = 6371200.0
# Mean Earth radius used for the spin-source domain.
EARTH_RADIUS = 6371000.0
# Core-mantle boundary; the internal harmonic expansion is refused below it.
CMB_RADIUS = 3.48e6

SECONDS_PER_DAY = 86400.0
DEG = math.pi / 180.0
