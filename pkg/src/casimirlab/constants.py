"""Physical constants and unit conversions.

All internal computation is SI.  Public interfaces quote energies in eV and
angular frequencies in rad/s; the conversions below are the single
authoritative place for the constants involved (CODATA / exact SI-2019
values, taken from scipy.constants: hbar = 1.054571817e-34 J s,
k_B = 1.380649e-23 J/K, c = 299792458 m/s, e = 1.602176634e-19 C).
"""

from scipy.constants import (
    Boltzmann as K_B,
    c as C_LIGHT,
    elementary_charge as E_CHARGE,
    epsilon_0 as EPSILON_0,
    hbar as HBAR,
)

__all__ = [
    "K_B",
    "C_LIGHT",
    "E_CHARGE",
    "EPSILON_0",
    "HBAR",
    "ev_to_rad_per_s",
    "rad_per_s_to_ev",
]


def ev_to_rad_per_s(energy_ev):
    """Convert a photon energy in eV to an angular frequency in rad/s."""
    return energy_ev * (E_CHARGE / HBAR)


def rad_per_s_to_ev(omega):
    """Convert an angular frequency in rad/s to a photon energy in eV."""
    return omega * (HBAR / E_CHARGE)
