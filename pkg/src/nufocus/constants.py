"""Physical constants and unit helpers.

Internal unit conventions used throughout the package:

* times in seconds,
* angular frequencies in rad/s,
* energies in eV (converted to rad/s by dividing by ``HBAR_EV_S``),
* magnetic fields in tesla,
* angles in radians.
"""

import numpy as np
import scipy.constants as _sc

HBAR_J_S = _sc.hbar                       # J s
HBAR_EV_S = _sc.hbar / _sc.e              # eV s
MU_B_J_T = _sc.physical_constants["Bohr magneton"][0]  # J/T

# arcsech(1/sqrt(2)) = arccosh(sqrt(2)); sets the sech spectral/temporal FWHM.
ARCSECH_INV_SQRT2 = float(np.arccosh(np.sqrt(2.0)))


def energy_to_angular(energy_ev: float) -> float:
    """Convert an energy in eV to an angular frequency in rad/s."""
    return energy_ev / HBAR_EV_S


def angular_to_energy(omega: float) -> float:
    """Convert an angular frequency in rad/s to an energy in eV."""
    return omega * HBAR_EV_S
