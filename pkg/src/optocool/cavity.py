"""Cavity, mechanical mode and operating-point parameter model.

All angular frequencies are in rad/s. Detuning follows
``detuning = omega_cavity - omega_laser``, so positive detuning (laser on
the red side of the resonance) cools the mechanical mode.
"""

from dataclasses import dataclass

import numpy as np

from .constants import c, hbar

#: Input-coupler power transmission of the default cavity (1 - 0.9993).
INPUT_COUPLER_TRANSMISSION = 1.0 - 0.9993


def coupling_fraction(transmission, finesse):
    """Input-coupling fraction ``kappa_in / kappa``.

    Ratio of the input-coupler transmission to the total round-trip loss
    ``2*pi/F``. For T = 7e-4 and F = 2200 this gives 0.245.
    """
    return transmission * finesse / (2.0 * np.pi)


DEFAULT_ETA_C = round(coupling_fraction(INPUT_COUPLER_TRANSMISSION, 2200.0), 3)


@dataclass(frozen=True)
class CavityGeometry:
    """Plano-concave Fabry-Perot geometry (flat micromirror, curved coupler).

    Attributes
    ----------
    length : float
        Cavity length (m). Must satisfy ``0 < length < roc``.
    roc : float
        Radius of curvature of the input coupler (m).
    wavelength : float
        Pump wavelength (m).
    """

    length: float
    roc: float = 0.025
    wavelength: float = 1064e-9

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if not 0 < self.length < self.roc:
            raise ValueError(
                f"unstable geometry: need 0 < length < roc, got length={self.length}, roc={self.roc}"
            )

    @property
    def laser_frequency(self):
        """Angular optical frequency 2*pi*c/lambda (rad/s)."""
        return 2.0 * np.pi * c / self.wavelength


@dataclass(frozen=True)
class OpticalCavity:
    geometry: CavityGeometry
    finesse: float
    eta_c: float = DEFAULT_ETA_C

    def __post_init__(self):
        if not self.finesse >= 1:
            raise ValueError(f"finesse must be >= 1, got {self.finesse}")
        if not 0 < self.eta_c <= 1:
            raise ValueError(f"eta_c must lie in (0, 1], got {self.eta_c}")

    @property
    def kappa(self):
        return cavity_linewidth(self)

    @property
    def fsr(self):
        return free_spectral_range(self)

    @property
    def length(self):
        return self.geometry.length

    @property
    def wavelength(self):
        return self.geometry.wavelength

    def with_finesse(self, finesse):
        return OpticalCavity(self.geometry, finesse, self.eta_c)


@dataclass(frozen=True)
class MechanicalMode:
    """A single mechanical eigenmode.

    ``gamma_0`` is the amplitude damping rate (half-width), so that the
    quality factor is ``omega_m / (2 gamma_0)``.
    """

    omega_m: float
    gamma_0: float
    mass: float

    def __post_init__(self):
        for name in ("omega_m", "gamma_0", "mass"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and > 0, got {val}")
        if not self.quality_factor > 1:
            raise ValueError(f"quality factor must exceed 1, got {self.quality_factor}")

    @property
    def quality_factor(self):
        return self.omega_m / (2.0 * self.gamma_0)

    def with_mass(self, mass):
        return MechanicalMode(self.omega_m, self.gamma_0, mass)


@dataclass(frozen=True)
class OperatingPoint:
    """Experimental condition at which predictions are made.

    ``detuning`` and ``power`` may be numpy arrays; the model functions
    broadcast over them. ``mode_matching`` multiplies the input power.
    """

    detuning: float
    power: float
    bath_temperature: float
    mode_matching: float = 1.0

    def __post_init__(self):
        if np.any(np.asarray(self.power) < 0):
            raise ValueError("power must be >= 0")
        if not self.bath_temperature > 0:
            raise ValueError(f"bath_temperature must be > 0, got {self.bath_temperature}")
        if not 0 < self.mode_matching <= 1:
            raise ValueError(f"mode_matching must lie in (0, 1], got {self.mode_matching}")

    @property
    def coupled_power(self):
        return self.mode_matching * np.asarray(self.power, dtype=float)

    def replace(self, **changes):
        kw = dict(
            detuning=self.detuning,
            power=self.power,
            bath_temperature=self.bath_temperature,
            mode_matching=self.mode_matching,
        )
        kw.update(changes)
        return OperatingPoint(**kw)


@dataclass(frozen=True)
class PhotothermalParams:
    """Retarded (bolometric) force model.

    Attributes
    ----------
    tau_pt : float
        Thermal retardation time (s).
    strength_ratio : float
        Static force magnitude relative to radiation pressure.
    """

    tau_pt: float
    strength_ratio: float = 1.0

    def __post_init__(self):
        if not self.tau_pt > 0:
            raise ValueError(f"tau_pt must be > 0, got {self.tau_pt}")
        if not self.strength_ratio >= 0:
            raise ValueError(f"strength_ratio must be >= 0, got {self.strength_ratio}")


def free_spectral_range(cav):
    """Angular free spectral range pi*c/L (rad/s)."""
    return np.pi * c / cav.geometry.length


def cavity_linewidth(cav):
    """Cavity intensity linewidth kappa (FWHM, rad/s) = FSR / F."""
    return free_spectral_range(cav) / cav.finesse


def cavity_waist(geom):
    """Mode waist on the flat mirror of a plano-concave cavity (m).

    ``w0**2 = (lambda/pi) * sqrt(L (R - L))``; shrinks to zero at the
    semi-concentric limit L -> R.
    """
    L, R = geom.length, geom.roc
    if not 0 < L < R:
        raise ValueError(f"unstable geometry: need 0 < L < R, got L={L}, R={R}")
    return np.sqrt(geom.wavelength / np.pi * np.sqrt(L * (R - L)))


def frequency_pull(cav):
    """Optomechanical frequency pull G = omega_c / L (rad/s per m)."""
    return cav.geometry.laser_frequency / cav.geometry.length


def intracavity_photon_number(cav, op):
    """Mean intracavity photon number for the pump described by ``op``."""
    kappa = cavity_linewidth(cav)
    flux = op.coupled_power / (hbar * cav.geometry.laser_frequency)
    delta = np.asarray(op.detuning, dtype=float)
    return cav.eta_c * kappa * flux / (delta**2 + (kappa / 2) ** 2)


def input_amplitude(cav, op):
    """Drive term sqrt(eta_c kappa) * sqrt(P / hbar omega_l) of the field equation
    (units sqrt(photons)/s)."""
    kappa = cavity_linewidth(cav)
    flux = op.coupled_power / (hbar * cav.geometry.laser_frequency)
    return np.sqrt(cav.eta_c * kappa) * np.sqrt(flux)


__all__ = [
    "CavityGeometry",
    "OpticalCavity",
    "MechanicalMode",
    "OperatingPoint",
    "PhotothermalParams",
    "DEFAULT_ETA_C",
    "INPUT_COUPLER_TRANSMISSION",
    "coupling_fraction",
    "free_spectral_range",
    "cavity_linewidth",
    "cavity_waist",
    "frequency_pull",
    "intracavity_photon_number",
    "input_amplitude",
]
