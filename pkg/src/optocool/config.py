"""Scenario configuration: JSON documents validated against a bundled schema.

Bundled scenarios (``cryo35K.json``, ``room295K.json``) live in the package;
a directory named by ``OPTOCOOL_CONFIG_DIR`` is searched before them.
"""

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .cavity import CavityGeometry, MechanicalMode, OpticalCavity, PhotothermalParams
from .errors import ConfigError
from .langevin import SimConfig, max_time_step
from .pdh import PdhConfig

CONFIG_DIR_ENV = "OPTOCOOL_CONFIG_DIR"
BUNDLED = ("cryo35K", "room295K")


def _bundled_dir():
    return resources.files("optocool") / "configs"


def load_schema():
    return json.loads((_bundled_dir() / "scenario.schema.json").read_text())


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    cavity: OpticalCavity
    mode: MechanicalMode
    powers: tuple
    detunings: tuple
    temperatures: tuple
    mode_matching: float
    pdh: PdhConfig
    photothermal: PhotothermalParams
    sim: dict
    source: str = ""

    def sim_config(self, duration=None, seed=None):
        """SimConfig at the resolution guard unless ``dt_s`` is set."""
        s = self.sim
        dt = s.get("dt_s", max_time_step(self.cavity, self.mode))
        stride = s.get("record_stride", 1)
        return SimConfig(
            dt=dt,
            duration=duration if duration is not None else s.get("duration_s", 0.05),
            seed=seed if seed is not None else s.get("seed", 0),
            transient_discard=s.get("transient_discard_s", 10.0 / self.mode.gamma_0),
            record_stride=stride,
        )


def resolve_config_path(name):
    """Locate a config by path, then in $OPTOCOOL_CONFIG_DIR, then among the
    bundled scenarios (``.json`` may be omitted)."""
    p = Path(name)
    if p.exists():
        return p
    candidates = [name] if name.endswith(".json") else [name, name + ".json"]
    env = os.environ.get(CONFIG_DIR_ENV)
    if env:
        for c in candidates:
            q = Path(env) / c
            if q.exists():
                return q
    for c in candidates:
        q = _bundled_dir() / c
        if q.is_file():
            return Path(str(q))
    raise ConfigError(f"config {name!r} not found (searched cwd, ${CONFIG_DIR_ENV}, bundled configs)")


def _line_of(text, path):
    """Best-effort line number of the JSON member addressed by ``path``."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def _where(source, text, path):
    dotted = ".".join(str(k) for k in path) or "<root>"
    return f"{source}:{_line_of(text, path)}: {dotted}"


def parse_config(text, source="<string>"):
    """Parse and validate a scenario document.

    Raises
    ------
    ConfigError
        With ``file:line: field: message`` on syntax, schema or physical
        invariant violations.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_where(source, text, list(e.absolute_path))}: {e.message}")

    def build(path, factory, **kw):
        try:
            return factory(**kw)
        except ValueError as exc:
            raise ConfigError(f"{_where(source, text, path)}: {exc}") from None

    cv = doc["cavity"]
    geom = build(
        ["cavity", "length_m"],
        CavityGeometry,
        length=cv["length_m"],
        roc=cv.get("roc_m", 0.025),
        wavelength=cv.get("wavelength_m", 1064e-9),
    )
    cav_kw = dict(geometry=geom, finesse=cv["finesse"])
    if "eta_c" in cv:
        cav_kw["eta_c"] = cv["eta_c"]
    cav = build(["cavity", "finesse"], OpticalCavity, **cav_kw)
    me = doc["mechanics"]
    mode = build(
        ["mechanics", "gamma_0_rad_s"],
        MechanicalMode,
        omega_m=me["omega_m_rad_s"],
        gamma_0=me["gamma_0_rad_s"],
        mass=me["mass_kg"],
    )
    op = doc["operating"]
    if "detunings_rad_s" in op:
        detunings = tuple(float(d) for d in op["detunings_rad_s"])
    else:
        g = op["detuning_grid"]
        detunings = tuple(np.linspace(g["start_omega_m"], g["stop_omega_m"], g["num"]) * mode.omega_m)
    pd = doc.get("pdh", {})
    pdh = build(
        ["pdh"],
        PdhConfig,
        **{
            k: pd[j]
            for k, j in (
                ("mod_freq", "mod_freq_rad_s"),
                ("mod_depth", "mod_depth_rad"),
                ("ref_freq", "ref_freq_rad_s"),
                ("ref_freq_deviation", "ref_freq_deviation_Hz"),
            )
            if j in pd
        },
    )
    ptd = doc.get("photothermal", {"tau_pt_s": 10.0 / mode.omega_m})
    pt = build(
        ["photothermal"],
        PhotothermalParams,
        tau_pt=ptd["tau_pt_s"],
        strength_ratio=ptd.get("strength_ratio", 1.0),
    )
    sim = dict(doc.get("sim", {}))
    if "dt_s" in sim and sim["dt_s"] > max_time_step(cav, mode) * (1 + 1e-12):
        raise ConfigError(
            f"{_where(source, text, ['sim', 'dt_s'])}: dt_s exceeds the resolution guard "
            f"{max_time_step(cav, mode):.4g} s"
        )
    return ScenarioConfig(
        name=doc.get("name", Path(source).stem),
        cavity=cav,
        mode=mode,
        powers=tuple(float(p) for p in op["powers_W"]),
        detunings=detunings,
        temperatures=tuple(float(t) for t in op["temperatures_K"]),
        mode_matching=float(op.get("mode_matching", 1.0)),
        pdh=pdh,
        photothermal=pt,
        sim=sim,
        source=str(source),
    )


def load_config(name):
    path = resolve_config_path(name)
    return parse_config(Path(path).read_text(), source=str(path))
