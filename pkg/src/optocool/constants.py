"""Physical constants (CODATA 2018, exact SI values where defined)."""

from dataclasses import dataclass

import scipy.constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = _sc.c
    hbar: float = _sc.hbar
    k_B: float = _sc.k


CONSTANTS = PhysicalConstants()

c = CONSTANTS.c
hbar = CONSTANTS.hbar
k_B = CONSTANTS.k_B
