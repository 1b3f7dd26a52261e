"""Pound-Drever-Hall readout chain and reference-tone calibration.

The demodulated error signal transduces cavity-length fluctuations with a
gain that depends on the locked detuning. A laser frequency-modulation tone
of known depth acts as a displacement-equivalent reference
(``dx / L = dnu / nu``) and removes that dependence.
"""

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .cavity import cavity_linewidth, frequency_pull
from .constants import c, k_B
from .errors import CalibrationError
from .fitting import fit_spectrum
from .spectra import SpectrumSeries, read_spectrum_csv, sidecar_path, write_spectrum_csv


@dataclass(frozen=True)
class PdhConfig:
    """Modulation settings.

    Attributes
    ----------
    mod_freq : float
        Phase-modulation (EOM) angular frequency (rad/s).
    mod_depth : float
        Phase-modulation depth (rad), below 1.
    ref_freq : float
        Angular frequency of the calibration tone (rad/s).
    ref_freq_deviation : float
        RMS laser frequency excursion of the calibration tone (Hz).
    """

    mod_freq: float = 2 * np.pi * 20e6
    mod_depth: float = 0.3
    ref_freq: float = 2 * np.pi * 2e6
    ref_freq_deviation: float = 50.0

    def __post_init__(self):
        if not self.mod_freq > 0:
            raise ValueError("mod_freq must be > 0")
        if not 0 < self.mod_depth < 1.0:
            raise ValueError("mod_depth must lie in (0, 1) rad")
        if not self.ref_freq > 0:
            raise ValueError("ref_freq must be > 0")
        if not self.ref_freq_deviation > 0:
            raise ValueError("ref_freq_deviation must be > 0")

    def check_separation(self, omega_eff, gamma_eff):
        """Reference tone must sit at least 5 mechanical linewidths from the peak."""
        if abs(self.ref_freq - omega_eff) < 5.0 * 2.0 * gamma_eff:
            raise ValueError(
                f"reference tone at {self.ref_freq:.6g} rad/s lies within 5 linewidths of the mechanical peak"
            )


@dataclass
class RawSpectrum:
    """Detector-unit spectrum as acquired at a given locked detuning."""

    omega: np.ndarray
    psd: np.ndarray
    detuning: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.psd = np.asarray(self.psd, dtype=float)
        if np.any(self.psd < 0):
            raise ValueError("raw psd must be >= 0")


def reflection_coefficient(cav, detuning):
    """Field reflection r = 1 - eta_c kappa / (kappa/2 + i detuning)."""
    kappa = cavity_linewidth(cav)
    detuning = np.asarray(detuning, dtype=float)
    return 1.0 - cav.eta_c * kappa / (kappa / 2 + 1j * detuning)


def _raw_error(cav, mod_freq, detuning):
    r = reflection_coefficient
    d = np.asarray(detuning, dtype=float)
    return np.imag(r(cav, d) * np.conj(r(cav, d + mod_freq)) - np.conj(r(cav, d)) * r(cav, d - mod_freq))


@lru_cache(maxsize=64)
def _normalization(cav, mod_freq):
    # peak-to-peak over a scan through both sidebands, oriented so that the
    # slope at resonance is positive
    kappa = cavity_linewidth(cav)
    span = mod_freq + 10.0 * kappa
    scan = np.linspace(-span, span, 40001)
    eps = _raw_error(cav, mod_freq, scan)
    h = 1e-4 * kappa
    slope = (_raw_error(cav, mod_freq, h) - _raw_error(cav, mod_freq, -h)) / (2 * h)
    return np.sign(slope) / np.ptp(eps)


def pdh_error_signal(cav, pdh, detuning):
    """Dimensionless PDH error signal, unit peak-to-peak, odd in detuning."""
    return _raw_error(cav, pdh.mod_freq, detuning) * _normalization(cav, pdh.mod_freq)


def error_slope(cav, pdh, detuning):
    """d(epsilon)/d(detuning) per rad/s (central difference)."""
    h = 1e-6 * cavity_linewidth(cav)
    d = np.asarray(detuning, dtype=float)
    return (pdh_error_signal(cav, pdh, d + h) - pdh_error_signal(cav, pdh, d - h)) / (2 * h)


def cavity_filter(cav, omega):
    """Single-pole cavity response 1/(1 - 2 i omega / kappa)."""
    return 1.0 / (1.0 - 2j * np.asarray(omega, dtype=float) / cavity_linewidth(cav))


def transduction_gain(cav, pdh, detuning, omega):
    """Detector units per metre of mirror displacement at Fourier frequency omega."""
    return error_slope(cav, pdh, detuning) * frequency_pull(cav) * np.abs(cavity_filter(cav, omega))


def reference_displacement_sq(cav, pdh):
    """Equivalent mean-square displacement of the calibration tone (m^2)."""
    nu_l = c / cav.wavelength
    return (cav.length * pdh.ref_freq_deviation / nu_l) ** 2


def _ref_bin(omega, ref_freq):
    i = int(np.argmin(np.abs(omega - ref_freq)))
    return i


def _bin_widths(omega):
    edges = np.concatenate([[omega[0]], 0.5 * (omega[1:] + omega[:-1]), [omega[-1]]])
    return np.diff(edges)


def synthesize_raw_spectrum(cav, mode, op, pdh, true_spectrum, noise_floor=0.0, include_reference=True):
    """Push a displacement spectrum through the PDH transduction.

    The calibration tone is deposited in the grid bin nearest ``ref_freq``
    with an area of ``gain^2 * x_ref^2``.
    """
    omega = true_spectrum.omega
    gain = transduction_gain(cav, pdh, op.detuning, omega)
    psd = gain**2 * true_spectrum.psd + noise_floor
    meta = {"pdh": asdict(pdh), "noise_floor": noise_floor, "source": true_spectrum.provenance}
    if include_reference:
        i = _ref_bin(omega, pdh.ref_freq)
        bw = _bin_widths(omega)[i]
        psd[i] += gain[i] ** 2 * reference_displacement_sq(cav, pdh) / bw
        meta["ref_bin"] = i
    return RawSpectrum(omega, psd, float(op.detuning), meta)


def _reference_area(raw, ref_freq, floor=0.0):
    i = _ref_bin(raw.omega, ref_freq)
    if i == 0 or i == raw.omega.size - 1:
        raise CalibrationError("reference tone lies at the grid edge")
    bw = _bin_widths(raw.omega)
    w = raw.omega
    # baseline under the tone: linear interpolation between neighbouring bins
    t = (w[i] - w[i - 1]) / (w[i + 1] - w[i - 1])
    baseline = (1 - t) * raw.psd[i - 1] + t * raw.psd[i + 1]
    excess = raw.psd[i] - baseline
    noise = max(baseline, abs(raw.psd[i + 1] - raw.psd[i - 1]), floor)
    if not excess > 10.0 * noise:
        raise CalibrationError(
            f"reference peak missing or weak: excess {excess:.3g} vs background {noise:.3g} (need SNR > 10)"
        )
    return excess * bw[i], i, baseline


def calibrate_spectrum(raw, pdh, cav, floor=0.0):
    """Convert a raw detector spectrum into displacement units (m^2/(rad/s)).

    The detuning-dependent gain is eliminated by the ratio of the known
    reference displacement to the measured tone area; only the (known)
    cavity filter shape is divided out explicitly. ``floor`` is subtracted
    first. The tone bin is replaced by its interpolated background.
    """
    area, i, baseline = _reference_area(raw, pdh.ref_freq, floor)
    h = np.abs(cavity_filter(cav, raw.omega)) ** 2
    scale = reference_displacement_sq(cav, pdh) / area * h[i] / h
    psd = raw.psd.copy()
    psd[i] = baseline
    psd = np.clip(psd - floor, 0.0, None) * scale
    meta = dict(raw.meta)
    meta.update(detuning=raw.detuning, reference_area=area)
    return SpectrumSeries(raw.omega, psd, "synthetic-pdh", meta)


def calibrate_effective_mass(calibrated, T_known, window=None):
    """Effective mass from a thermal spectrum at known bath temperature.

    m = k_B T / (omega_eff^2 <x^2>), with omega_eff and the line area taken
    from a fit of the damped-oscillator line shape.
    """
    fit = fit_spectrum(calibrated, window=window)
    w = fit.params["omega_eff"]
    x2 = fit.extra["x2_mean"]
    return k_B * T_known / (w**2 * x2)


def write_raw_spectrum(raw, path, pdh=None):
    """CSV (omega_rad_s, psd, units) plus JSON sidecar with acquisition metadata."""
    s = SpectrumSeries(raw.omega, raw.psd, "synthetic-pdh", units="detector^2/(rad/s)")
    write_spectrum_csv(s, path, sidecar=False)
    meta = {"detuning_rad_s": raw.detuning, "units": "detector^2/(rad/s)", "meta": raw.meta}
    if pdh is not None:
        meta["pdh"] = asdict(pdh)
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=float) + "\n")
    return Path(path)


def read_raw_spectrum(path):
    s = read_spectrum_csv(path)
    side = json.loads(sidecar_path(path).read_text())
    return RawSpectrum(s.omega, s.psd, float(side["detuning_rad_s"]), side.get("meta", {}))
