"""Mode thermometry, cooling sweeps and heating diagnostics."""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backaction import RADIATION_PRESSURE, effective_dynamics
from .cavity import OperatingPoint, cavity_linewidth
from .constants import hbar, k_B
from .errors import ConfigError

SIDEBAND_THRESHOLD = 1.0 / np.sqrt(32.0)

SWEEP_COLUMNS = (
    "power_W",
    "detuning_rad_s",
    "omega_eff_rad_s",
    "gamma_eff_rad_s",
    "T_eff_K",
    "n_mean",
    "stable",
)


@dataclass(frozen=True)
class ThermoResult:
    x2_mean: float
    T_eff: float
    n_mean: float


@dataclass(frozen=True)
class SweepRow:
    power: float
    detuning: float
    omega_eff: float
    gamma_eff: float
    T_eff: float
    n_mean: float
    stable: bool

    def as_tuple(self):
        return (
            self.power,
            self.detuning,
            self.omega_eff,
            self.gamma_eff,
            self.T_eff,
            self.n_mean,
            self.stable,
        )


@dataclass(frozen=True)
class CollapseResult:
    slope: float
    intercept: float
    max_residual: float
    residual_by_power: dict

    @property
    def heating_detected(self):
        return self.max_residual > 0.01


@dataclass(frozen=True)
class ThresholdResult:
    ratio: float
    threshold: float
    passes: bool


def effective_temperature(mode, omega_eff, x2_mean):
    """Mode temperature from the spectral area: m omega_eff^2 <x^2> / k_B."""
    return mode.mass * omega_eff**2 * x2_mean / k_B


def occupancy(omega_eff, T_eff):
    """Bose-Einstein mean phonon number at (omega_eff, T_eff).

    For k_B T >> hbar omega this approaches k_B T/(hbar omega) - 1/2.
    """
    T_eff = np.asarray(T_eff, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = hbar * np.asarray(omega_eff, dtype=float) / (k_B * T_eff)
        n = 1.0 / np.expm1(x)
    return n


def cooling_law_temperature(T0, gamma_0, gamma_eff):
    return T0 * gamma_0 / gamma_eff


def thermo_result(mode, omega_eff, x2_mean):
    T = effective_temperature(mode, omega_eff, x2_mean)
    return ThermoResult(x2_mean=x2_mean, T_eff=T, n_mean=float(occupancy(omega_eff, T)))


def _sweep_point(cav, mode, op, kind, pt):
    dyn = effective_dynamics(cav, mode, op, kind, pt)
    w, g = float(dyn.omega_eff), float(dyn.gamma_eff)
    stable = g > 0
    if stable:
        # area of the effective thermal spectrum; equals T0 gamma_0 / gamma_eff
        T = cooling_law_temperature(op.bath_temperature, mode.gamma_0, g)
        n = float(occupancy(w, T))
    else:
        T = n = float("nan")
    return SweepRow(float(op.power), float(op.detuning), w, g, T, n, bool(stable))


def cooling_sweep(
    cav,
    mode,
    powers,
    detunings,
    T0,
    kind=RADIATION_PRESSURE,
    pt=None,
    mode_matching=1.0,
    workers=None,
):
    """Effective dynamics and mode temperature over a (power, detuning) grid.

    Rows are ordered power-major in input order. Unstable points are kept
    with ``stable=False`` and NaN temperature. ``workers`` > 1 evaluates
    points in a thread pool; row order does not depend on it.
    """
    powers = [float(p) for p in powers]
    detunings = [float(d) for d in detunings]
    if not powers or not detunings:
        raise ValueError("cooling_sweep needs non-empty power and detuning grids")
    ops = [OperatingPoint(d, p, T0, mode_matching) for p in powers for d in detunings]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda op: _sweep_point(cav, mode, op, kind, pt), ops))
    return [_sweep_point(cav, mode, op, kind, pt) for op in ops]


def collapse_diagnostic(rows):
    """Fit log T_eff against log gamma_eff across all stable rows.

    Pure backaction cooling puts every row on one line of slope -1 whatever
    the pump power; power-dependent heating lifts the high-power rows off
    it. ``max_residual`` is the largest relative deviation from the fitted
    line, ``residual_by_power`` the mean signed relative residual per power.
    """
    rows = [r for r in rows if r.stable and np.isfinite(r.T_eff)]
    if not rows:
        raise ValueError("collapse diagnostic needs at least one stable row")
    lg = np.log([r.gamma_eff for r in rows])
    lt = np.log([r.T_eff for r in rows])
    if np.ptp(lg) <= 1e-12 * max(1.0, np.abs(lg).max()):
        raise ValueError("degenerate: all gamma_eff values are equal")
    slope, intercept = np.polyfit(lg, lt, 1)
    rel = np.expm1(lt - (slope * lg + intercept))
    by_power = {}
    for r, e in zip(rows, rel):
        by_power.setdefault(r.power, []).append(e)
    return CollapseResult(
        slope=float(slope),
        intercept=float(intercept),
        max_residual=float(np.max(np.abs(rel))),
        residual_by_power={p: float(np.mean(v)) for p, v in by_power.items()},
    )


def sideband_threshold_check(cav, mode):
    """Resolved-sideband figure omega_m/kappa against the 1/sqrt(32) threshold."""
    ratio = mode.omega_m / cavity_linewidth(cav)
    return ThresholdResult(ratio=float(ratio), threshold=float(SIDEBAND_THRESHOLD), passes=bool(ratio > SIDEBAND_THRESHOLD))


def write_sweep_csv(rows, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            vals = r.as_tuple()
            w.writerow([repr(float(v)) for v in vals[:-1]] + [str(vals[-1]).lower()])
    return path


def read_sweep_csv(path):
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SWEEP_COLUMNS:
            raise ConfigError(f"{path}: row 1: expected columns {','.join(SWEEP_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(SWEEP_COLUMNS):
                raise ConfigError(f"{path}: row {lineno}: expected {len(SWEEP_COLUMNS)} columns, got {len(row)}")
            try:
                nums = [float(v) for v in row[:-1]]
            except ValueError:
                bad = next(i for i, v in enumerate(row[:-1]) if not _is_float(v))
                raise ConfigError(
                    f"{path}: row {lineno}, column {bad + 1} ({SWEEP_COLUMNS[bad]}): not a number: {row[bad]!r}"
                ) from None
            rows.append(SweepRow(*nums, row[-1].strip().lower() == "true"))
    return rows


def _is_float(v):
    try:
        float(v)
    except ValueError:
        return False
    return True
