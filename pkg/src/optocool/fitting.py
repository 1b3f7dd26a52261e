"""Nonlinear least squares: a Levenberg-Marquardt core, single-spectrum
fits of the damped-oscillator line shape, and global detuning-curve fits
for finesse and effective mass."""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate, ndimage

from .backaction import RADIATION_PRESSURE, effective_dynamics
from .cavity import OperatingPoint
from .errors import ConfigError, FitError
from .spectra import eq1_area, eq1_shape

DETUNING_COLUMNS = ("detuning_rad_s", "power_W", "omega_eff_rad_s", "gamma_eff_rad_s", "weight")


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``params``/``std_errors`` are keyed by parameter name in physical units;
    ``covariance`` follows the order of ``names``.
    """

    names: list
    params: dict
    std_errors: dict
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    iterations: int
    gradient_norm: float = float("nan")
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def values(self):
        return np.array([self.params[n] for n in self.names])

    def to_dict(self):
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "std_errors": {k: float(v) for k, v in self.std_errors.items()},
            "names": list(self.names),
            "covariance": np.asarray(self.covariance, dtype=float).tolist(),
            "diagnostics": {
                "residual_norm": float(self.residual_norm),
                "converged": bool(self.converged),
                "iterations": int(self.iterations),
                "gradient_norm": float(self.gradient_norm),
                "message": self.message,
                **{k: _plain(v) for k, v in self.extra.items()},
            },
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.generic):
        return v.item()
    return v


def _fd_jacobian(fun, x, r0, rel_step=1e-7):
    J = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = rel_step * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (fun(xp) - fun(xm)) / (2.0 * h)
    return J


@dataclass
class _Solution:
    x: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    cost: float
    iterations: int
    converged: bool
    gradient_norm: float
    message: str


def _levenberg_marquardt(fun, x0, jac=None, max_iter=200, xtol=1e-8, gtol=1e-10, ftol=1e-15):
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fun(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("invalid-init", "residuals are not finite at the initial point")
    cost = 0.5 * r @ r
    lam = 0.0
    for it in range(1, max_iter + 1):
        J = np.asarray(jac(x), dtype=float) if jac is not None else _fd_jacobian(fun, x, r)
        g = J.T @ r
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm < gtol:
            return _Solution(x, r, J, cost, it, True, gnorm, "gradient norm below tolerance")
        A = J.T @ J
        dmax = float(np.max(np.diag(A)))
        if dmax <= 0:
            raise FitError("singular-jacobian", "Jacobian is identically zero")
        while True:
            M = A + lam * np.diag(np.maximum(np.diag(A), 1e-12 * dmax))
            try:
                step = -np.linalg.solve(M, g)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                x_new = x + step
                r_new = np.asarray(fun(x_new), dtype=float)
                if np.all(np.isfinite(r_new)):
                    cost_new = 0.5 * r_new @ r_new
                    if cost_new <= cost:
                        break
            lam = max(10.0 * lam, 1e-3)
            if lam > 1e16:
                return _Solution(x, r, J, cost, it, False, gnorm, "damping diverged; no descent step")
        reduction = cost - cost_new
        x, r = x_new, r_new
        cost_old, cost = cost, cost_new
        lam = lam / 10.0 if lam > 1e-7 else 0.0
        if np.linalg.norm(step) < xtol * (np.linalg.norm(x) + xtol):
            J = np.asarray(jac(x), dtype=float) if jac is not None else _fd_jacobian(fun, x, r)
            return _Solution(x, r, J, cost, it, True, float(np.max(np.abs(J.T @ r))), "relative step below tolerance")
        if reduction <= ftol * cost_old:
            J = np.asarray(jac(x), dtype=float) if jac is not None else _fd_jacobian(fun, x, r)
            return _Solution(x, r, J, cost, it, True, float(np.max(np.abs(J.T @ r))), "cost reduction below tolerance")
    raise FitError("max-iterations", f"no convergence after {max_iter} iterations")


def _covariance(J, residuals, scale_by_residual=True):
    n, p = J.shape
    s = np.linalg.svd(J, compute_uv=False)
    if s.size == 0 or s[-1] <= np.finfo(float).eps * max(n, p) * s[0]:
        raise FitError("singular-jacobian", "Jacobian is rank deficient at the optimum")
    cov = np.linalg.inv(J.T @ J)
    if scale_by_residual and n > p:
        cov = cov * (residuals @ residuals) / (n - p)
    return cov


def nls_minimize(model, init, names=None, jac=None, max_iter=200, xtol=1e-8, gtol=1e-10, absolute_sigma=False):
    """Minimize ``sum(model(p)**2)`` with a damped Gauss-Newton iteration.

    Parameters
    ----------
    model : callable
        Maps a parameter vector to the residual vector.
    init : array_like
        Starting parameters; residuals must be finite there.
    names : list of str, optional
        Parameter names for the result (default ``p0, p1, ...``).
    jac : callable, optional
        Analytic Jacobian; central differences otherwise.
    absolute_sigma : bool
        If False the covariance is rescaled by the residual variance.

    Raises
    ------
    FitError
        ``max-iterations``, ``singular-jacobian`` or ``invalid-init``.
    """
    x0 = np.atleast_1d(np.asarray(init, dtype=float))
    names = list(names) if names is not None else [f"p{i}" for i in range(x0.size)]
    sol = _levenberg_marquardt(model, x0, jac=jac, max_iter=max_iter, xtol=xtol, gtol=gtol)
    cov = _covariance(sol.jacobian, sol.residuals, not absolute_sigma)
    err = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        names=names,
        params=dict(zip(names, sol.x)),
        std_errors=dict(zip(names, err)),
        covariance=cov,
        residual_norm=float(np.linalg.norm(sol.residuals)),
        converged=sol.converged,
        iterations=sol.iterations,
        gradient_norm=sol.gradient_norm,
        message=sol.message,
    )


def _transform_result(fit, names, values, jac_to_physical):
    """Re-express a fit done in internal coordinates in physical units."""
    D = np.asarray(jac_to_physical)
    cov = D @ fit.covariance @ D.T
    err = np.sqrt(np.clip(np.diag(cov), 0, None))
    return FitResult(
        names=list(names),
        params=dict(zip(names, values)),
        std_errors=dict(zip(names, err)),
        covariance=cov,
        residual_norm=fit.residual_norm,
        converged=fit.converged,
        iterations=fit.iterations,
        gradient_norm=fit.gradient_norm,
        message=fit.message,
        extra={"internal_covariance": fit.covariance},
    )


def _half_power_estimate(omega, psd, floor, smooth):
    sm = ndimage.uniform_filter1d(psd, size=min(smooth, psd.size), mode="nearest") if smooth > 1 else psd
    i = int(np.argmax(sm))
    peak = sm[i]
    half = floor + (peak - floor) / 2.0
    lo = i
    while lo > 0 and sm[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < psd.size - 1 and sm[hi + 1] >= half:
        hi += 1
    # interpolate the half-power crossings
    w_lo = omega[lo] if lo == 0 else np.interp(half, [sm[lo - 1], sm[lo]], [omega[lo - 1], omega[lo]])
    w_hi = omega[hi] if hi == psd.size - 1 else np.interp(half, [sm[hi + 1], sm[hi]], [omega[hi + 1], omega[hi]])
    dw = np.median(np.diff(omega[max(i - 2, 0) : i + 3])) if omega.size > 2 else 1.0
    gamma = max((w_hi - w_lo) / 2.0, dw / 2.0)
    return omega[i], gamma, peak, hi - lo + 1


def spectrum_initial_guess(omega, psd, smooth=5):
    """Starting values (omega_eff, gamma_eff, A, floor) for a line-shape fit.

    Peak position and half-power half-width are read off a ``smooth``-bin
    running mean, which keeps single noisy bins of averaged periodograms
    from posing as the peak. Noise dips inside a broad line can still cut
    the half-power crossing short, so the width is then refined from the
    line area, which for this shape equals ``pi * gamma * peak``. The floor
    is the median of the outer 5% of bins at each end.
    """
    k = max(1, psd.size // 20)
    floor = float(np.median(np.concatenate([psd[:k], psd[-k:]])))
    w0, gamma, peak, _ = _half_power_estimate(omega, psd, floor, smooth)
    for _ in range(6):
        sel = np.abs(omega - w0) <= 20.0 * gamma
        if np.count_nonzero(sel) < 5:
            break
        i = int(np.argmin(np.abs(omega - w0)))
        dw = np.median(np.diff(omega[max(i - 2, 0) : i + 3]))
        bins = int(np.clip(gamma / (2.0 * dw), 1, psd.size // 4))
        sm = ndimage.uniform_filter1d(psd, size=bins, mode="nearest") if bins > 1 else psd
        near = np.abs(omega - w0) <= gamma
        height = float(np.max(sm[near])) - floor if np.any(near) else peak - floor
        area = integrate.trapezoid(np.clip(psd[sel] - floor, 0.0, None), omega[sel])
        if not height > 0 or not area > 0:
            break
        refined = area / (np.pi * height)
        converged = abs(refined / gamma - 1.0) < 0.02
        gamma, peak = refined, height + floor
        if converged:
            break
    amp = max(peak - floor, peak * 1e-3) * 4.0 * gamma**2 * w0**2
    return w0, gamma, amp, floor


def fit_spectrum(s, window=None, floor=True):
    """Fit ``A / ((w_eff^2 - w^2)^2 + 4 gamma_eff^2 w^2) + floor`` to a spectrum.

    Residuals are taken in log space, which suits the multiplicative noise
    of averaged periodograms and makes the fit invariant to the overall
    scale of the data.

    Parameters
    ----------
    s : SpectrumSeries
    window : float, optional
        Restrict the fit to ``omega_peak +/- window * gamma_estimate``.
    floor : bool
        Include a constant background term.

    Returns
    -------
    FitResult
        Parameters ``A``, ``omega_eff``, ``gamma_eff``, ``floor``; ``extra``
        carries the integrated line area ``x2_mean``.
    """
    omega, psd = np.asarray(s.omega, float), np.asarray(s.psd, float)
    # median over a uniform resampling, so dense grids near the peak do not bias it
    med = np.median(np.interp(np.linspace(omega[0], omega[-1], 4096), omega, psd))
    if not psd.max() > 5.0 * med:
        raise FitError("no-peak", f"peak/median = {psd.max() / med if med > 0 else np.inf:.3g} <= 5")
    w0, g0, a0, f0 = spectrum_initial_guess(omega, psd)
    sel = psd > 0
    if window is not None:
        sel &= np.abs(omega - w0) <= window * g0
    om, y = omega[sel], psd[sel]
    if om.size < 5:
        raise FitError("no-peak", "too few usable bins around the peak")
    ly = np.log(y)
    peak = y.max()
    fscale = y.min()
    hscale = a0 / (4.0 * g0**2 * w0**2)

    # internal coordinates: log(A/a0), w/w0, log(g/g0), floor/min(data)
    def unpack(p):
        A = a0 * np.exp(p[0])
        w = w0 * p[1]
        g = g0 * np.exp(p[2])
        fl = p[3] * fscale if floor else 0.0
        return A, w, g, fl

    def residuals(p):
        A, w, g, fl = unpack(p)
        model = eq1_shape(om, A, w, g) + fl
        return np.log(np.maximum(model, 1e-200 * peak)) - ly

    # background starts below the lowest wing value
    start = np.array([0.0, 1.0, 0.0, min(f0 / fscale, 0.5) if floor else 0.0])
    if not floor:
        fit = nls_minimize(lambda p: residuals(np.append(p, 0.0)), start[:3])
        fit.params["p3"], fit.std_errors["p3"] = 0.0, 0.0
        cov = np.zeros((4, 4))
        cov[:3, :3] = fit.covariance
        fit.covariance = cov
        fit.names = fit.names + ["p3"]
    else:
        fit = nls_minimize(residuals, start)
    p = fit.values
    A, w, g, fl = unpack(p)
    D = np.diag([A, w0, g, fscale if floor else 0.0])
    out = _transform_result(fit, ["A", "omega_eff", "gamma_eff", "floor"], [A, w, g, fl], D)
    out.extra["x2_mean"] = float(eq1_area(A, w, g))
    out.extra["n_bins"] = int(om.size)
    out.extra["peak_height_estimate"] = float(hscale)
    return out


@dataclass
class DetuningDataset:
    """Measured effective frequency and damping versus detuning (and power)."""

    detuning: np.ndarray
    power: np.ndarray
    omega_eff: np.ndarray
    gamma_eff: np.ndarray
    weight: np.ndarray = None

    def __post_init__(self):
        self.detuning = np.asarray(self.detuning, dtype=float)
        n = self.detuning.size
        self.power = np.broadcast_to(np.asarray(self.power, dtype=float), (n,)).copy()
        self.omega_eff = np.asarray(self.omega_eff, dtype=float)
        self.gamma_eff = np.asarray(self.gamma_eff, dtype=float)
        self.weight = np.ones(n) if self.weight is None else np.asarray(self.weight, dtype=float)
        if not (self.omega_eff.size == self.gamma_eff.size == self.weight.size == n):
            raise ValueError("dataset columns must have equal length")
        if n < 4:
            raise ValueError(f"dataset needs at least 4 rows, got {n}")
        if np.unique(self.detuning).size < 3:
            raise ValueError("dataset needs at least 3 distinct detunings")
        if np.any(self.weight < 0):
            raise ValueError("weights must be >= 0")

    def __len__(self):
        return self.detuning.size

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(DETUNING_COLUMNS)
            for row in zip(self.detuning, self.power, self.omega_eff, self.gamma_eff, self.weight):
                w.writerow([repr(float(v)) for v in row])
        return Path(path)

    @classmethod
    def read_csv(cls, path):
        cols = [[] for _ in DETUNING_COLUMNS]
        try:
            fh = Path(path).open(newline="")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot open ({exc.strerror})") from exc
        with fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != DETUNING_COLUMNS:
                raise ConfigError(f"{path}: row 1: expected header {','.join(DETUNING_COLUMNS)}, got {header}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(DETUNING_COLUMNS):
                    raise ConfigError(
                        f"{path}: row {lineno}: expected {len(DETUNING_COLUMNS)} columns, got {len(row)}"
                    )
                for j, v in enumerate(row):
                    try:
                        cols[j].append(float(v))
                    except ValueError:
                        raise ConfigError(
                            f"{path}: row {lineno}, column {j + 1} ({DETUNING_COLUMNS[j]}): not a number: {v!r}"
                        ) from None
        try:
            return cls(*[np.array(c) for c in cols])
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def model_detuning_curves(cav, mode, detuning, power, kind=RADIATION_PRESSURE, pt=None):
    """Predicted (omega_eff, gamma_eff) arrays for the dataset's operating points."""
    op = OperatingPoint(np.asarray(detuning, float), np.asarray(power, float), 1.0)
    dyn = effective_dynamics(cav, mode, op, kind, pt)
    return np.asarray(dyn.omega_eff, float), np.asarray(dyn.gamma_eff, float)


def synthesize_detuning_dataset(cav, mode, power, detunings, noise=0.0, rng=None):
    """Noisy (omega_eff, gamma_eff) samples from the backaction model.

    ``noise`` is the relative standard deviation applied to the optically
    induced changes, ``omega_eff - omega_m`` and ``gamma_eff``.
    """
    rng = np.random.default_rng(rng)
    det = np.asarray(detunings, dtype=float)
    w, g = model_detuning_curves(cav, mode, det, power)
    if noise:
        w = w + noise * np.abs(w - mode.omega_m) * rng.standard_normal(det.size)
        g = g * (1.0 + noise * rng.standard_normal(det.size))
    return DetuningDataset(det, power, w, g)


def fit_detuning_curves(data, cav_template, mode_template, free=("finesse", "mass"), init=None):
    """Joint fit of the effective frequency and damping curves.

    Finesse and effective mass float (in log coordinates, relative to the
    templates); coupling fraction, power and every other parameter stay at
    their template values. The frequency and damping residuals are each
    divided by the sample spread of that observable and multiplied by
    ``sqrt(weight)``.

    Raises
    ------
    FitError
        ``unidentifiable`` when the parameter covariance has condition
        number above 1e10, or any error from :func:`nls_minimize`.
    """
    free = tuple(free)
    allowed = ("finesse", "mass")
    if not free or any(f not in allowed for f in free):
        raise ValueError(f"free parameters must be a non-empty subset of {allowed}")
    F0 = cav_template.finesse
    m0 = mode_template.mass
    if init is not None:
        F0 = init.get("finesse", F0)
        m0 = init.get("mass", m0)
    sw = np.std(data.omega_eff) or 1.0
    sg = np.std(data.gamma_eff) or 1.0
    rw = np.sqrt(data.weight)

    def build(p):
        vals = dict(zip(free, p))
        F = F0 * np.exp(vals.get("finesse", 0.0))
        m = m0 * np.exp(vals.get("mass", 0.0))
        return F, m

    def residuals(p):
        F, m = build(p)
        if not F >= 1:
            return np.full(2 * len(data), np.inf)
        cav = cav_template.with_finesse(F)
        mode = mode_template.with_mass(m)
        w, g = model_detuning_curves(cav, mode, data.detuning, data.power)
        return np.concatenate([rw * (w - data.omega_eff) / sw, rw * (g - data.gamma_eff) / sg])

    fit = nls_minimize(residuals, np.zeros(len(free)), names=list(free), absolute_sigma=True)
    # identifiability from the unscaled (J^T J)^-1, which stays finite on exact data
    cond = np.linalg.cond(fit.covariance)
    if not np.isfinite(cond) or cond > 1e10:
        raise FitError("unidentifiable", f"covariance condition number {cond:.3g} > 1e10")
    n_res, n_par = 2 * len(data), len(free)
    fit.covariance = fit.covariance * fit.residual_norm**2 / max(n_res - n_par, 1)
    F, m = build(fit.values)
    phys = {"finesse": F, "mass": m}
    D = np.diag([phys[n] for n in free])
    out = _transform_result(fit, list(free), [phys[n] for n in free], D)
    out.extra["condition_number"] = float(cond)
    res = residuals(fit.values)
    out.extra["residuals"] = res
    return out
