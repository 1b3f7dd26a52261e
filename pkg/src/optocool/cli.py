"""``optocool`` command line: sweep, spectrum, fit and check subcommands.

Exit codes: 0 success, 2 input or configuration error, 3 physics
instability, 4 fit failure.
"""

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .backaction import KINDS, PHOTOTHERMAL, RADIATION_PRESSURE, effective_dynamics
from .cavity import OperatingPoint
from .config import load_config
from .errors import CalibrationError, ConfigError, FitError, InstabilityError
from .fitting import DetuningDataset, fit_detuning_curves, fit_spectrum
from .langevin import simulate, welch_psd
from .spectra import read_spectrum_csv, spectrum_eq1, spectrum_full, write_spectrum_csv
from .thermo import (
    SWEEP_COLUMNS,
    collapse_diagnostic,
    cooling_sweep,
    read_sweep_csv,
    sideband_threshold_check,
    write_sweep_csv,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INSTABILITY = 3
EXIT_FIT = 4


def _err(msg):
    print(f"optocool: {msg}", file=sys.stderr)


def _pt(cfg, kind):
    return cfg.photothermal if kind == PHOTOTHERMAL else None


def _suffixed(out, T, multi):
    if not multi:
        return out
    tag = f"{T:g}".replace(".", "p")
    return out.with_name(f"{out.stem}_T{tag}K{out.suffix}")


def _write_sweep_json(rows, path, cfg, T, kind):
    doc = {
        "scenario": cfg.name,
        "bath_temperature_K": T,
        "kind": kind,
        "columns": list(SWEEP_COLUMNS),
        "rows": [
            [None if isinstance(v, float) and not np.isfinite(v) else v for v in r.as_tuple()] for r in rows
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def cmd_sweep(args):
    cfg = load_config(args.config)
    out = Path(args.out)
    multi = len(cfg.temperatures) > 1
    any_stable = False
    for T in cfg.temperatures:
        rows = cooling_sweep(
            cfg.cavity, cfg.mode, cfg.powers, cfg.detunings, T,
            kind=args.kind, pt=_pt(cfg, args.kind), mode_matching=cfg.mode_matching, workers=args.workers,
        )
        path = _suffixed(out, T, multi)
        if args.format == "json":
            _write_sweep_json(rows, path, cfg, T, args.kind)
        else:
            write_sweep_csv(rows, path)
        stable = [r for r in rows if r.stable]
        any_stable |= bool(stable)
        if stable:
            best = min(stable, key=lambda r: r.T_eff)
            _err(
                f"T0={T:g} K: wrote {len(rows)} rows to {path}; minimum T_eff {best.T_eff:.6g} K "
                f"at P={best.power:g} W, detuning={best.detuning / cfg.mode.omega_m:.4g} omega_m"
            )
        else:
            _err(f"T0={T:g} K: wrote {len(rows)} rows to {path}; every point is unstable")
    return EXIT_OK if any_stable else EXIT_INSTABILITY


def cmd_spectrum(args):
    cfg = load_config(args.config)
    mode = cfg.mode
    if args.detuning is not None:
        detuning = args.detuning
    elif args.detuning_omega_m is not None:
        detuning = args.detuning_omega_m * mode.omega_m
    else:
        detuning = mode.omega_m
    power = args.power if args.power is not None else cfg.powers[-1]
    T = args.temperature if args.temperature is not None else cfg.temperatures[0]
    op = OperatingPoint(detuning, power, T, cfg.mode_matching)
    pt = _pt(cfg, args.force)
    if args.kind == "eq1":
        dyn = effective_dynamics(cfg.cavity, mode, op, args.force, pt)
        s = spectrum_eq1(mode, float(dyn.omega_eff), float(dyn.gamma_eff), T)
        s.meta.update(detuning=float(detuning), power=float(power), kind=args.force)
    elif args.kind == "full":
        s = spectrum_full(cfg.cavity, mode, op, kind=args.force, pt=pt)
    else:
        sim = cfg.sim_config(duration=args.duration, seed=args.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            traj = simulate(cfg.cavity, mode, op, sim, pt=pt)
        s = welch_psd(traj, n_segments=args.segments)
    write_spectrum_csv(s, args.out)
    _err(f"wrote {s.omega.size}-point {s.provenance} spectrum to {args.out}")
    return EXIT_OK


def cmd_fit(args):
    mode = args.mode or ("detuning" if args.dataset else "spectrum")
    if mode == "spectrum":
        if not args.spectrum:
            raise ConfigError("--mode spectrum needs --spectrum FILE")
        s = read_spectrum_csv(args.spectrum)
        fit = fit_spectrum(s, window=args.window)
    else:
        if not args.dataset:
            raise ConfigError("--mode detuning needs --dataset FILE")
        if not args.config:
            raise ConfigError("--mode detuning needs --config (fixed parameters and initial guesses)")
        cfg = load_config(args.config)
        data = DetuningDataset.read_csv(args.dataset)
        fit = fit_detuning_curves(data, cfg.cavity, cfg.mode, free=tuple(args.free.split(",")))
    text = fit.to_json()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_check(args):
    cfg = load_config(args.config)
    th = sideband_threshold_check(cfg.cavity, cfg.mode)
    print(f"omega_m/kappa = {th.ratio:.3f}, threshold 1/sqrt(32) = {th.threshold:.3f}")
    print(f"{th.ratio:.3f} > {th.threshold:.3f}: {'PASS' if th.passes else 'FAIL'}")
    if args.table:
        rows = read_sweep_csv(args.table)
        col = collapse_diagnostic(rows)
        print(f"collapse slope {col.slope:.2f}, max relative residual {col.max_residual:.3g}")
        for p, r in sorted(col.residual_by_power.items()):
            print(f"  P={p!r} W: mean residual {r:.3g}")
        print("heating detected" if col.heating_detected else "no heating detected")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="optocool", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="cooling sweep over the config's power and detuning grids")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--kind", choices=KINDS, default=RADIATION_PRESSURE)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("spectrum", help="displacement spectrum at one operating point")
    s.add_argument("config")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--detuning", type=float, help="rad/s (default omega_m)")
    g.add_argument("--detuning-omega-m", type=float, help="detuning in units of omega_m")
    s.add_argument("--power", type=float, help="W (default: largest configured power)")
    s.add_argument("--temperature", type=float, help="K (default: first configured temperature)")
    s.add_argument("--kind", choices=("eq1", "full", "langevin"), default="eq1")
    s.add_argument("--force", choices=KINDS, default=RADIATION_PRESSURE)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--duration", type=float, default=None, help="simulated record length (s)")
    s.add_argument("--segments", type=int, default=32, help="Welch segments for --kind langevin")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("fit", help="fit a spectrum or a detuning dataset, emit a JSON report")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--spectrum")
    g.add_argument("--dataset")
    s.add_argument("--mode", choices=("spectrum", "detuning"))
    s.add_argument("--config")
    s.add_argument("--free", default="finesse,mass")
    s.add_argument("--window", type=float, default=None, help="fit window in linewidths around the peak")
    s.add_argument("--out")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("check", help="sideband threshold and optional collapse diagnostic")
    s.add_argument("config")
    s.add_argument("--table", help="sweep CSV for the collapse diagnostic")
    s.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, CalibrationError) as exc:
        _err(str(exc))
        return EXIT_INPUT
    except InstabilityError as exc:
        _err(f"instability: {exc}")
        return EXIT_INSTABILITY
    except FitError as exc:
        _err(f"fit failed: {exc}")
        return EXIT_FIT
    except (ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
