"""Physical constants for rubidium-87.

Everything species-specific lives here so that the numbers are fixed in
exactly one place.
"""

import math

from scipy import constants as _c

HBAR = _c.hbar
SPEED_OF_LIGHT = _c.c
ATOMIC_MASS_UNIT = _c.atomic_mass

# Rb-87 atomic mass, 86.909180527 u (Steck, "Rubidium 87 D Line Data", rev. 2.2.2).
RB87_MASS = 86.909180527 * ATOMIC_MASS_UNIT

# D2 line vacuum wavelength, 780.241209686 nm (Steck, same table).
RB87_D2_WAVELENGTH = 780.241209686e-9

# Ground-state hyperfine splitting, 6.834682610904 GHz (Steck, same table).
RB87_HYPERFINE_SPLITTING = 2.0 * math.pi * 6.834682610904e9

# Two counterpropagating photons: K = (omega_b + omega_r)/c ~ 2 k_D2.
RB87_EFFECTIVE_WAVENUMBER = 2.0 * (2.0 * math.pi / RB87_D2_WAVELENGTH)
