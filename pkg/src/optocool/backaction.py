"""Linearized radiation-pressure and photothermal backaction.

Fourier convention: time dependence ``exp(+i w t)``. With the mechanical
equation of motion ``m (w_m^2 - w^2 + 2 i gamma_0 w) x = F_th - Sigma(w) x``
the real part of the self-energy ``Sigma`` stiffens the mode and the
imaginary part adds damping:

    omega_eff = omega_m + Re Sigma(omega_m) / (2 m omega_m)
    gamma_eff = gamma_0 + Im Sigma(omega_m) / (2 m omega_m)

These first-order expressions reproduce :func:`optical_spring_shift` and
:func:`gamma_opt` exactly.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cavity import cavity_linewidth, frequency_pull, intracavity_photon_number
from .constants import hbar

RADIATION_PRESSURE = "rp"
PHOTOTHERMAL = "photothermal"
KINDS = (RADIATION_PRESSURE, PHOTOTHERMAL)


@dataclass(frozen=True)
class SelfEnergy:
    """Force-per-displacement response (N/m) with its value at omega_m cached."""

    sigma: Callable
    at_resonance: complex
    kind: str = RADIATION_PRESSURE

    def __call__(self, omega):
        return self.sigma(omega)


@dataclass(frozen=True)
class EffectiveDynamics:
    """Backaction-modified resonance (omega_eff) and half-width damping (gamma_eff).

    Fields may be arrays when the operating point is.
    """

    omega_eff: float
    gamma_eff: float
    omega_m: float
    gamma_0: float
    kind: str = RADIATION_PRESSURE

    @property
    def stable(self):
        return np.asarray(self.gamma_eff) > 0

    @property
    def gamma_opt(self):
        """Added energy damping rate (full width)."""
        return 2.0 * (np.asarray(self.gamma_eff) - self.gamma_0)

    @property
    def frequency_shift(self):
        return np.asarray(self.omega_eff) - self.omega_m


def _coupling_strength(cav, op):
    # hbar G^2 n_cav, in N/(m s)
    G = frequency_pull(cav)
    return hbar * G**2 * intracavity_photon_number(cav, op)


def rp_self_energy(cav, mode, op, omega):
    """Radiation-pressure self-energy Sigma(omega) in N/m.

    Broadcasts over ``omega`` and over array-valued ``op.detuning`` /
    ``op.power``. Vanishes identically at zero detuning.
    """
    kappa = cavity_linewidth(cav)
    delta = np.asarray(op.detuning, dtype=float)
    omega = np.asarray(omega, dtype=float)
    strength = _coupling_strength(cav, op)
    upper = 1.0 / (kappa / 2 + 1j * (delta + omega))
    lower = 1.0 / (kappa / 2 - 1j * (delta - omega))
    return -1j * strength * (upper - lower)


def pt_self_energy(cav, mode, op, pt, omega):
    """Photothermal self-energy: the cavity-filtered intensity response scaled
    by ``pt.strength_ratio`` and delayed by a single thermal pole ``tau_pt``."""
    omega = np.asarray(omega, dtype=float)
    lag = 1.0 / (1.0 + 1j * omega * pt.tau_pt)
    return pt.strength_ratio * rp_self_energy(cav, mode, op, omega) * lag


def self_energy(cav, mode, op, kind=RADIATION_PRESSURE, pt=None):
    """Bundle the self-energy of the requested kind as a :class:`SelfEnergy`."""
    if kind == RADIATION_PRESSURE:

        def sigma(omega):
            return rp_self_energy(cav, mode, op, omega)

    elif kind == PHOTOTHERMAL:
        if pt is None:
            raise ValueError("photothermal kind requires PhotothermalParams")

        def sigma(omega):
            return pt_self_energy(cav, mode, op, pt, omega)

    else:
        raise ValueError(f"unknown backaction kind {kind!r}; expected one of {KINDS}")
    return SelfEnergy(sigma=sigma, at_resonance=sigma(mode.omega_m), kind=kind)


def _bracket_prefactor(cav, mode, op):
    return _coupling_strength(cav, op) / (2.0 * mode.mass * mode.omega_m)


def gamma_opt(cav, mode, op):
    """Optically added energy damping Gamma_opt (full width, rad/s).

    Positive (cooling) for positive detuning, odd in detuning, linear in power.
    """
    kappa = cavity_linewidth(cav)
    delta = np.asarray(op.detuning, dtype=float)
    wm = mode.omega_m
    h2 = (kappa / 2) ** 2
    bracket = kappa / (h2 + (delta - wm) ** 2) - kappa / (h2 + (delta + wm) ** 2)
    return _bracket_prefactor(cav, mode, op) * bracket


def optical_spring_shift(cav, mode, op):
    """Optical-spring frequency shift delta omega_m (rad/s)."""
    kappa = cavity_linewidth(cav)
    delta = np.asarray(op.detuning, dtype=float)
    wm = mode.omega_m
    h2 = (kappa / 2) ** 2
    bracket = (delta + wm) / (h2 + (delta + wm) ** 2) + (delta - wm) / (h2 + (delta - wm) ** 2)
    return -_bracket_prefactor(cav, mode, op) * bracket


def effective_dynamics(cav, mode, op, kind=RADIATION_PRESSURE, pt=None):
    """Effective resonance and damping at an operating point.

    The returned object exposes a ``stable`` flag; gamma_eff <= 0 marks a
    parametric instability (anti-damping beats intrinsic damping). Callers
    that need a stable mode should check it; nothing is raised here.
    """
    if kind == RADIATION_PRESSURE:
        shift = optical_spring_shift(cav, mode, op)
        added = gamma_opt(cav, mode, op)
    elif kind == PHOTOTHERMAL:
        if pt is None:
            raise ValueError("photothermal kind requires PhotothermalParams")
        sig = pt_self_energy(cav, mode, op, pt, mode.omega_m)
        scale = 2.0 * mode.mass * mode.omega_m
        shift = sig.real / scale
        added = 2.0 * sig.imag / scale
    else:
        raise ValueError(f"unknown backaction kind {kind!r}; expected one of {KINDS}")
    return EffectiveDynamics(
        omega_eff=mode.omega_m + shift,
        gamma_eff=mode.gamma_0 + added / 2.0,
        omega_m=mode.omega_m,
        gamma_0=mode.gamma_0,
        kind=kind,
    )
