"""Time-domain stochastic simulation of the coupled field/mirror dynamics.

Equations integrated (detuning = omega_c - omega_l, G the frequency pull):

    dx/dt = v
    dv/dt = -omega_m^2 x - 2 gamma_0 v + (F_opt + F_th) / m
    da/dt = -(kappa/2 + i (detuning - G x)) a + sqrt(eta_c kappa) sqrt(P / hbar omega_l)

``F_opt = hbar G (|a|^2 - n_cav)``: the static part of the radiation force is
assumed compensated by the lock, so ``detuning`` is the operating detuning.
For the photothermal kind ``F_opt`` is replaced by a lagged copy,
``tau dF/dt = strength * hbar G (|a|^2 - n_cav) - F``. The thermal force is
white with two-sided PSD ``4 m gamma_0 k_B T0``.

Stepping: the optical and thermal forces enter as a velocity kick, after
which the free damped oscillator is propagated exactly over ``dt`` (matrix
exponential), so the integrator adds no frequency or damping error of its
own. The field takes an exponential (exact-for-frozen-x) step and the
thermal lag its exact decay.
"""

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy import linalg, signal

from .backaction import PHOTOTHERMAL, RADIATION_PRESSURE
from .cavity import cavity_linewidth, frequency_pull, input_amplitude, intracavity_photon_number
from .constants import hbar, k_B
from .errors import InstabilityError
from .spectra import SpectrumSeries

_MAGIC = b"OPTOTRJ1"
_COLUMNS = ("times", "x", "v", "field_re", "field_im")
_CHUNK = 1 << 20


class StationarityWarning(UserWarning):
    """Transient discard is shorter than 10 mechanical decay times."""


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    Attributes
    ----------
    dt : float
        Integration step (s).
    duration : float
        Length of the recorded trajectory (s), after the transient.
    seed : int
        64-bit seed of the PCG64 noise generator.
    transient_discard : float
        Simulated time dropped before recording starts (s).
    record_stride : int
        Record every ``record_stride``-th step.
    """

    dt: float
    duration: float
    seed: int = 0
    transient_discard: float = 0.0
    record_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0 or not self.duration > 0:
            raise ValueError("dt and duration must be > 0")
        if self.transient_discard < 0:
            raise ValueError("transient_discard must be >= 0")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def sample_interval(self):
        return self.dt * self.record_stride


def max_time_step(cav, mode):
    """Resolution guard: dt <= min(2 pi/omega_m, 1/kappa) / 20."""
    return min(2.0 * np.pi / mode.omega_m, 1.0 / cavity_linewidth(cav)) / 20.0


def default_config(cav, mode, duration, seed=0, samples_per_period=16, transient=None):
    """Config at the resolution guard, recording ~``samples_per_period`` points
    per mechanical period and discarding 10 decay times by default."""
    dt = max_time_step(cav, mode)
    stride = max(1, int((2 * np.pi / mode.omega_m) / samples_per_period / dt))
    transient = 10.0 / mode.gamma_0 if transient is None else transient
    return SimConfig(dt=dt, duration=duration, seed=seed, transient_discard=transient, record_stride=stride)


@dataclass
class Trajectory:
    """Uniformly sampled simulation output."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    field_re: np.ndarray
    field_im: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def sample_interval(self):
        return float(self.times[1] - self.times[0])

    def __len__(self):
        return self.times.size

    def save(self, path):
        """Binary record: magic, little-endian uint64 header length, UTF-8
        JSON header, then the five columns as contiguous ``<f8`` arrays."""
        header = dict(self.params, n_samples=int(self.times.size), columns=list(_COLUMNS), dtype="<f8")
        hb = json.dumps(header, sort_keys=True, default=_json_default).encode()
        with Path(path).open("wb") as fh:
            fh.write(_MAGIC)
            fh.write(np.array([len(hb)], dtype="<u8").tobytes())
            fh.write(hb)
            for name in _COLUMNS:
                fh.write(np.ascontiguousarray(getattr(self, name), dtype="<f8").tobytes())
        return Path(path)

    @classmethod
    def load(cls, path):
        data = Path(path).read_bytes()
        if data[:8] != _MAGIC:
            raise ValueError(f"{path}: not a trajectory record")
        (hlen,) = np.frombuffer(data[8:16], dtype="<u8")
        header = json.loads(data[16 : 16 + int(hlen)].decode())
        n = header.pop("n_samples")
        header.pop("columns", None)
        header.pop("dtype", None)
        cols = np.frombuffer(data[16 + int(hlen) :], dtype="<f8").reshape(len(_COLUMNS), n)
        return cls(*[c.copy() for c in cols], params=header)

    def to_csv(self, path, decimate=1):
        idx = slice(None, None, int(decimate))
        arr = np.column_stack([getattr(self, c)[idx] for c in _COLUMNS])
        np.savetxt(path, arr, delimiter=",", header=",".join(_COLUMNS), comments="", fmt="%.17g")
        return Path(path)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


def _oscillator_propagator(mode, dt):
    generator = np.array([[0.0, 1.0], [-mode.omega_m**2, -2.0 * mode.gamma_0]])
    return linalg.expm(generator * dt)


@numba.njit(cache=True)
def _integrate_chunk(state, noise, out_x, out_v, out_re, out_im, step0, n_skip, stride, pars):
    x, v, are, aim, fpt = state[0], state[1], state[2], state[3], state[4]
    inv_m, dt, half_kappa = pars[2], pars[3], pars[4]
    delta, G, drive, force_scale, n_bar = pars[5], pars[6], pars[7], pars[8], pars[9]
    sig_v, pt_on, pt_decay, pt_gain = pars[10], pars[11], pars[12], pars[13]
    m11, m12, m21, m22 = pars[14], pars[15], pars[16], pars[17]
    decay = np.exp(-half_kappa * dt)
    # steps until the next recorded sample
    j = step0 + 1 - n_skip
    if j <= 0:
        countdown = 1 - j + stride - 1
        k = 0
    else:
        countdown = (stride - j % stride) % stride
        k = (j + countdown) // stride - 1
    for i in range(noise.shape[0]):
        n_ph = are * are + aim * aim
        f = force_scale * (n_ph - n_bar)
        if pt_on > 0.5:
            fpt = fpt * pt_decay + (1.0 - pt_decay) * pt_gain * f
            f = fpt
        v = v + dt * f * inv_m + sig_v * noise[i]
        x, v = m11 * x + m12 * v, m21 * x + m22 * v
        # field: exact step of da/dt = -(k/2 + i d) a + drive with d frozen
        d = delta - G * x
        e_re = decay * np.cos(d * dt)
        e_im = -decay * np.sin(d * dt)
        den = half_kappa * half_kappa + d * d
        q_re = ((1.0 - e_re) * half_kappa - e_im * d) / den
        q_im = (-e_im * half_kappa - (1.0 - e_re) * d) / den
        new_re = are * e_re - aim * e_im + drive * q_re
        aim = are * e_im + aim * e_re + drive * q_im
        are = new_re
        if countdown == 0:
            if k < out_x.shape[0]:
                out_x[k] = x
                out_v[k] = v
                out_re[k] = are
                out_im[k] = aim
            k += 1
            countdown = stride
        countdown -= 1
        if not np.isfinite(x) or abs(x) > 1.0:
            state[0], state[1], state[2], state[3], state[4] = x, v, are, aim, fpt
            return False
    state[0], state[1], state[2], state[3], state[4] = x, v, are, aim, fpt
    return True


def simulate(cav, mode, op, cfg, pt=None, initial=None, thermal_noise=True):
    """Integrate one stochastic trajectory.

    Parameters
    ----------
    cav, mode, op
        Cavity, mechanical mode and operating point (scalar detuning/power).
    cfg : SimConfig
    pt : PhotothermalParams, optional
        If given, the optical force acts through the thermal lag instead of
        directly (photothermal kind).
    initial : (x0, v0), optional
        Initial mechanical state. Default: a thermal draw at T0.
    thermal_noise : bool
        Switch the Langevin force off for deterministic ring-downs.

    Raises
    ------
    ValueError
        ``cfg.dt`` violates the resolution guard.
    InstabilityError
        The trajectory diverges.
    """
    guard = max_time_step(cav, mode)
    if cfg.dt > guard * (1 + 1e-12):
        raise ValueError(f"dt = {cfg.dt:.4g} s exceeds the resolution guard {guard:.4g} s")
    if cfg.transient_discard < 10.0 / mode.gamma_0:
        warnings.warn(
            f"transient_discard {cfg.transient_discard:.3g} s < 10/gamma_0 = {10 / mode.gamma_0:.3g} s",
            StationarityWarning,
            stacklevel=2,
        )
    rng = np.random.Generator(np.random.PCG64(int(cfg.seed)))
    kappa = cavity_linewidth(cav)
    G = frequency_pull(cav)
    delta = float(op.detuning)
    drive = float(input_amplitude(cav, op))
    n_bar = float(intracavity_photon_number(cav, op))
    T0 = op.bath_temperature
    m = mode.mass
    sig_v = np.sqrt(4.0 * mode.gamma_0 * k_B * T0 * cfg.dt / m) if thermal_noise else 0.0

    if initial is None:
        x0 = rng.standard_normal() * np.sqrt(k_B * T0 / (m * mode.omega_m**2))
        v0 = rng.standard_normal() * np.sqrt(k_B * T0 / m)
    else:
        x0, v0 = map(float, initial)
    # field starts at its steady state for the initial displacement
    a0 = drive / complex(kappa / 2, delta - G * x0) if drive else 0j

    pt_on = pt is not None
    pt_decay = np.exp(-cfg.dt / pt.tau_pt) if pt_on else 0.0
    pt_gain = pt.strength_ratio if pt_on else 0.0
    pars = np.array(
        [mode.omega_m**2, 2 * mode.gamma_0, 1.0 / m, cfg.dt, kappa / 2, delta, G, drive,
         hbar * G, n_bar, sig_v, float(pt_on), pt_decay, pt_gain, *_oscillator_propagator(mode, cfg.dt).ravel()],
        dtype=np.float64,
    )
    stride = int(cfg.record_stride)
    n_skip = int(round(cfg.transient_discard / cfg.dt))
    n_rec = int(round(cfg.duration / cfg.sample_interval))
    n_total = n_skip + n_rec * stride
    out = [np.empty(n_rec) for _ in range(4)]
    state = np.array([x0, v0, a0.real, a0.imag, 0.0])
    done = 0
    while done < n_total:
        nc = min(_CHUNK, n_total - done)
        noise = rng.standard_normal(nc) if thermal_noise else np.zeros(nc)
        if not _integrate_chunk(state, noise, *out, done, n_skip, stride, pars):
            raise InstabilityError(f"trajectory diverged within steps {done}..{done + nc} (|x| > 1 m or non-finite)")
        done += nc
    times = (n_skip + stride * (1 + np.arange(n_rec))) * cfg.dt
    kind = PHOTOTHERMAL if pt_on else RADIATION_PRESSURE
    params = dict(
        omega_m=mode.omega_m, gamma_0=mode.gamma_0, mass=m, finesse=cav.finesse, length=cav.length,
        wavelength=cav.wavelength, eta_c=cav.eta_c, detuning=delta, power=float(op.power),
        bath_temperature=T0, kind=kind, sim=asdict(cfg), n_cav=n_bar,
    )
    if pt_on:
        params.update(tau_pt=pt.tau_pt, strength_ratio=pt.strength_ratio)
    return Trajectory(times, out[0], out[1], out[2], out[3], params)


def welch_psd(traj, segment_length=None, overlap_fraction=0.5, n_segments=None):
    """Single-sided displacement PSD in m^2/(rad/s) (Hann windows).

    Either ``segment_length`` (samples) or ``n_segments`` may be given; the
    default splits the record into 8 half-overlapping segments. The density
    normalization makes the integral over omega >= 0 estimate var(x).
    """
    x = np.asarray(traj.x if hasattr(traj, "x") else traj, dtype=float)
    dt = traj.sample_interval if hasattr(traj, "sample_interval") else None
    if dt is None:
        raise TypeError("welch_psd needs a Trajectory (or an object with x and sample_interval)")
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must lie in [0, 1)")
    if segment_length is None:
        k = 8 if n_segments is None else int(n_segments)
        segment_length = int(x.size / (1 + (k - 1) * (1 - overlap_fraction)))
    segment_length = int(segment_length)
    step = segment_length - int(overlap_fraction * segment_length)
    n_seg = 1 + (x.size - segment_length) // step if x.size >= segment_length else 0
    if n_seg < 4:
        raise ValueError(f"trajectory too short: {n_seg} segments of {segment_length} samples (need >= 4)")
    f, p = signal.welch(
        x,
        fs=1.0 / dt,
        window="hann",
        nperseg=segment_length,
        noverlap=int(overlap_fraction * segment_length),
        detrend="constant",
        scaling="density",
        return_onesided=True,
    )
    omega = 2.0 * np.pi * f
    meta = dict(getattr(traj, "params", {}), segment_length=segment_length, n_segments=n_seg,
                overlap_fraction=overlap_fraction)
    return SpectrumSeries(omega, p / (2.0 * np.pi), "langevin", meta)


def _bin_correlation_factor(segment_length, lags=4):
    """sqrt(1 + 2 sum_k rho_k) for the power correlation rho_k between PSD
    bins k apart under a periodic Hann window of the given length."""
    w2 = signal.get_window("hann", segment_length) ** 2
    n = np.arange(segment_length)
    rho = [abs(np.sum(w2 * np.exp(-2j * np.pi * k * n / segment_length))) ** 2 / np.sum(w2) ** 2 for k in range(1, lags + 1)]
    return float(np.sqrt(1.0 + 2.0 * np.sum(rho)))


def oracle_effective_dynamics(traj, resolution=1 / 16, window=25.0, min_segments=8):
    """Fit the simulated PSD with the damped-oscillator line shape.

    A coarse periodogram locates the peak and width; the segment length is
    then chosen so that the bin spacing is ``resolution * gamma`` (capped so
    that at least ``min_segments`` half-overlapping segments remain).

    Returns
    -------
    FitResult
        With ``omega_eff``, ``gamma_eff`` (and ``A``, ``floor``) plus
        standard errors.
    """
    from .fitting import fit_spectrum, spectrum_initial_guess

    coarse = welch_psd(traj, n_segments=min_segments)
    _, g_est, _, _ = spectrum_initial_guess(coarse.omega, coarse.psd)
    dt = traj.sample_interval
    seg = int(2 * np.pi / (resolution * g_est * dt))
    max_seg = int(len(traj) / (1 + (min_segments - 1) * 0.5))
    seg = max(16, min(seg, max_seg))
    s = welch_psd(traj, segment_length=seg)
    fit = fit_spectrum(s, window=window)
    # the line-shape fit treats bins as independent; Hann leakage correlates neighbours
    inflate = _bin_correlation_factor(seg)
    fit.covariance = fit.covariance * inflate**2
    fit.std_errors = {k: v * inflate for k, v in fit.std_errors.items()}
    fit.extra["bin_correlation_factor"] = inflate
    fit.extra["segment_length"] = seg
    fit.extra["resolution_rad_s"] = float(s.omega[1] - s.omega[0])
    return fit
