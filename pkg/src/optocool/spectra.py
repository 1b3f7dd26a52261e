"""Displacement power spectral densities of the mechanical mode.

Spectra are single-sided densities in m^2/(rad/s) on an angular-frequency
grid ``omega >= 0``; their integral over the grid is the mean-square
displacement.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from .backaction import RADIATION_PRESSURE, effective_dynamics, self_energy
from .constants import k_B
from .errors import ConfigError, InstabilityError

PROVENANCES = ("analytic-eq1", "analytic-full", "langevin", "synthetic-pdh", "external")
DISPLACEMENT_UNITS = "m^2/(rad/s)"
MIN_GRID_LENGTH = 16


class TailCorrectionWarning(UserWarning):
    """The analytic tail correction is a large fraction of the integrated area."""


@dataclass
class SpectrumSeries:
    """A sampled single-sided power spectral density.

    Attributes
    ----------
    omega : ndarray
        Strictly increasing angular-frequency grid (rad/s).
    psd : ndarray
        Non-negative density values.
    provenance : str
        One of :data:`PROVENANCES`.
    meta : dict
        Parameters the spectrum was generated from.
    units : str
        Units of ``psd``.
    """

    omega: np.ndarray
    psd: np.ndarray
    provenance: str = "external"
    meta: dict = field(default_factory=dict)
    units: str = DISPLACEMENT_UNITS

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if self.omega.ndim != 1 or self.omega.shape != self.psd.shape:
            raise ValueError("omega and psd must be 1-D arrays of equal length")
        if self.omega.size < MIN_GRID_LENGTH:
            raise ValueError(f"grid needs at least {MIN_GRID_LENGTH} points, got {self.omega.size}")
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega grid must be strictly increasing")
        if self.omega[0] < 0:
            raise ValueError("omega grid must be non-negative")
        if np.any(self.psd < 0) or not np.all(np.isfinite(self.psd)):
            raise ValueError("psd values must be finite and >= 0")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def __len__(self):
        return self.omega.size


def lorentzian_grid(omega_eff, gamma_eff, n=4096, upper=3.0):
    """Grid on [0, upper*omega_eff] whose points are equally spaced in the
    Lorentzian phase ``arctan((w - omega_eff)/gamma_eff)``, so every bin
    carries roughly the same share of the peak area."""
    hi = max(upper * omega_eff, omega_eff + 40.0 * gamma_eff)
    theta = np.linspace(np.arctan(-omega_eff / gamma_eff), np.arctan((hi - omega_eff) / gamma_eff), n)
    grid = omega_eff + gamma_eff * np.tan(theta)
    grid[0] = 0.0
    return np.unique(grid)


def eq1_shape(omega, amplitude, omega_eff, gamma_eff):
    """``amplitude / ((omega_eff^2 - w^2)^2 + 4 gamma_eff^2 w^2)``."""
    omega = np.asarray(omega, dtype=float)
    return amplitude / ((omega_eff**2 - omega**2) ** 2 + 4.0 * gamma_eff**2 * omega**2)


def eq1_area(amplitude, omega_eff, gamma_eff):
    """Exact integral of :func:`eq1_shape` over [0, inf)."""
    return amplitude * np.pi / (4.0 * gamma_eff * omega_eff**2)


def thermal_amplitude(mode, temperature):
    """Prefactor 4 k_B T gamma_0 / (pi m) of the thermal spectrum."""
    return 4.0 * k_B * temperature * mode.gamma_0 / (np.pi * mode.mass)


def _check_coverage(grid, omega_eff, gamma_eff):
    lo = max(0.0, omega_eff - 20.0 * gamma_eff)
    hi = omega_eff + 20.0 * gamma_eff
    if grid[0] > lo or grid[-1] < hi:
        raise ValueError(
            f"grid [{grid[0]:.6g}, {grid[-1]:.6g}] must cover omega_eff +/- 20 gamma_eff = [{lo:.6g}, {hi:.6g}]"
        )


def spectrum_eq1(mode, omega_eff, gamma_eff, temperature, grid=None):
    """Thermal displacement spectrum of a damped oscillator with effective parameters.

    The numerator keeps the intrinsic damping ``gamma_0`` (the bath coupling)
    while the line shape uses ``gamma_eff``, so the area is
    ``k_B T gamma_0 / (m gamma_eff omega_eff^2)``.
    """
    if not gamma_eff > 0:
        raise InstabilityError(f"gamma_eff must be > 0, got {gamma_eff}")
    grid = lorentzian_grid(omega_eff, gamma_eff) if grid is None else np.asarray(grid, dtype=float)
    _check_coverage(grid, omega_eff, gamma_eff)
    amp = thermal_amplitude(mode, temperature)
    meta = dict(
        amplitude=amp,
        omega_eff=float(omega_eff),
        gamma_eff=float(gamma_eff),
        temperature=float(temperature),
        omega_m=mode.omega_m,
        gamma_0=mode.gamma_0,
        mass=mode.mass,
    )
    return SpectrumSeries(grid, eq1_shape(grid, amp, omega_eff, gamma_eff), "analytic-eq1", meta)


def full_spectrum_density(cav, mode, op, omega, kind=RADIATION_PRESSURE, pt=None):
    """Thermal spectrum through the frequency-dependent optomechanical susceptibility."""
    omega = np.asarray(omega, dtype=float)
    sigma = self_energy(cav, mode, op, kind, pt)(omega)
    m = mode.mass
    denom = (mode.omega_m**2 - omega**2 + sigma.real / m) ** 2 + (
        2.0 * mode.gamma_0 * omega + sigma.imag / m
    ) ** 2
    return thermal_amplitude(mode, op.bath_temperature) / denom


def spectrum_full(cav, mode, op, kind=RADIATION_PRESSURE, grid=None, pt=None):
    """Displacement spectrum including the full self-energy Sigma(omega).

    Raises :class:`InstabilityError` when the operating point is unstable.
    """
    dyn = effective_dynamics(cav, mode, op, kind, pt)
    if not np.all(dyn.stable):
        raise InstabilityError(
            f"unstable operating point: gamma_eff = {float(dyn.gamma_eff):.6g} rad/s <= 0"
        )
    w_eff, g_eff = float(dyn.omega_eff), float(dyn.gamma_eff)
    grid = lorentzian_grid(w_eff, g_eff) if grid is None else np.asarray(grid, dtype=float)
    _check_coverage(grid, w_eff, g_eff)
    psd = full_spectrum_density(cav, mode, op, grid, kind, pt)
    meta = dict(
        omega_eff=w_eff,
        gamma_eff=g_eff,
        temperature=op.bath_temperature,
        detuning=float(op.detuning),
        power=float(op.power),
        kind=kind,
        omega_m=mode.omega_m,
        gamma_0=mode.gamma_0,
        mass=mode.mass,
    )
    return SpectrumSeries(grid, psd, "analytic-full", meta)


def _peak_estimates(s):
    i = int(np.argmax(s.psd))
    w0 = s.omega[i]
    half = s.psd[i] / 2.0
    above = np.nonzero(s.psd >= half)[0]
    width = s.omega[above[-1]] - s.omega[above[0]]
    gamma = max(width / 2.0, np.min(np.diff(s.omega)))
    return w0, gamma


def _tail_integral(s):
    """Area of the damped-oscillator continuation beyond both grid ends,
    amplitude-matched to the end values."""
    if "omega_eff" in s.meta and "gamma_eff" in s.meta:
        w0, g = float(s.meta["omega_eff"]), float(s.meta["gamma_eff"])
    else:
        w0, g = _peak_estimates(s)
    shape = lambda w: eq1_shape(w, 1.0, w0, g)  # noqa: E731
    tail = 0.0
    a, b = s.omega[0], s.omega[-1]
    if a > 0 and s.psd[0] > 0:
        tail += s.psd[0] / shape(a) * integrate.quad(shape, 0.0, a, limit=200)[0]
    if s.psd[-1] > 0:
        tail += s.psd[-1] / shape(b) * integrate.quad(shape, b, np.inf, limit=200)[0]
    return tail


def mean_square_displacement(s, tail_correction=True):
    """Integrated area of a single-sided spectrum over omega >= 0 (m^2).

    Trapezoidal integration over the grid plus the analytic tail beyond the
    grid ends. Emits :class:`TailCorrectionWarning` when the tail exceeds 1%
    of the total.
    """
    body = integrate.trapezoid(s.psd, s.omega)
    if not tail_correction:
        return float(body)
    tail = _tail_integral(s)
    total = body + tail
    if total > 0 and tail > 0.01 * total:
        warnings.warn(
            f"tail correction is {100 * tail / total:.2f}% of the integrated area; widen the grid",
            TailCorrectionWarning,
            stacklevel=2,
        )
    return float(total)


def write_spectrum_csv(s, path, sidecar=True):
    """Write ``omega_rad_s, psd, units`` columns plus a JSON sidecar with
    provenance and metadata."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega_rad_s", "psd", "units"])
        for om, p in zip(s.omega, s.psd):
            w.writerow([repr(float(om)), repr(float(p)), s.units])
    if sidecar:
        meta = {"provenance": s.provenance, "units": s.units, "meta": _jsonable(s.meta)}
        sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_spectrum_csv(path):
    """Read a spectrum CSV (and its sidecar if present).

    Raises :class:`ConfigError` naming the offending row and column on
    malformed input.
    """
    path = Path(path)
    omega, psd, units = [], [], None
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["omega_rad_s", "psd"]:
            raise ConfigError(f"{path}: row 1: expected header 'omega_rad_s,psd,units', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}: row {lineno}: expected at least 2 columns, got {len(row)}")
            vals = []
            for col, name in enumerate(("omega_rad_s", "psd")):
                try:
                    vals.append(float(row[col]))
                except ValueError:
                    raise ConfigError(
                        f"{path}: row {lineno}, column {col + 1} ({name}): not a number: {row[col]!r}"
                    ) from None
            omega.append(vals[0])
            psd.append(vals[1])
            if len(row) > 2 and row[2]:
                units = row[2]
    provenance, meta = "external", {}
    sc = sidecar_path(path)
    if sc.exists():
        side = json.loads(sc.read_text())
        provenance = side.get("provenance", provenance)
        meta = side.get("meta", {})
        units = units or side.get("units")
    try:
        return SpectrumSeries(np.array(omega), np.array(psd), provenance, meta, units or DISPLACEMENT_UNITS)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
