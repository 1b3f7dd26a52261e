import json

import numpy as np
import pytest

from optocool.config import BUNDLED, CONFIG_DIR_ENV, load_config, load_schema, parse_config, resolve_config_path
from optocool.errors import ConfigError


def _doc():
    return json.loads(resolve_config_path("cryo35K").read_text())


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_configs_load(name):
    cfg = load_config(name)
    assert cfg.cavity.eta_c == 0.245
    assert cfg.mode.omega_m == pytest.approx(2 * np.pi * 557e3)
    assert cfg.mode.gamma_0 == pytest.approx(2 * np.pi * 269)
    assert cfg.detunings[0] == 0.0 and cfg.detunings[-1] == pytest.approx(3 * cfg.mode.omega_m)
    kappa = cfg.cavity.kappa
    assert cfg.sim_config().dt == pytest.approx(min(2 * np.pi / cfg.mode.omega_m, 1 / kappa) / 20)


def test_bundled_values():
    cryo, room = load_config("cryo35K"), load_config("room295K")
    assert (cryo.cavity.finesse, cryo.mode.mass, cryo.temperatures, max(cryo.powers)) == (2200, 40e-12, (35.0,), 14e-3)
    assert (room.cavity.finesse, room.mode.mass, room.temperatures, max(room.powers)) == (2300, 125e-12, (295.0,), 3.7e-3)


def test_notes_sidecars_cover_every_field():
    for name in BUNDLED:
        path = resolve_config_path(name)
        notes = json.loads(path.with_name(f"{name}.notes.json").read_text())
        doc = json.loads(path.read_text())
        for section, body in doc.items():
            if isinstance(body, dict):
                for key in body:
                    assert f"{section}.{key}" in notes or section in notes, f"{name}: {section}.{key}"


def test_schema_is_valid_jsonschema():
    import jsonschema

    jsonschema.Draft202012Validator.check_schema(load_schema())


def test_syntax_error_line():
    text = '{\n  "cavity": {\n    "length_m": 0.02,\n  }\n}\n'
    with pytest.raises(ConfigError, match=r"x\.json:4:3: invalid JSON"):
        parse_config(text, "x.json")


def test_schema_error_line():
    doc = _doc()
    doc["operating"]["detuning_grid"]["num"] = 0
    text = json.dumps(doc, indent=2)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if '"num"' in ln)
    with pytest.raises(ConfigError, match=rf"c\.json:{line}: operating\.detuning_grid\.num"):
        parse_config(text, "c.json")


def test_empty_detuning_list():
    doc = _doc()
    del doc["operating"]["detuning_grid"]
    doc["operating"]["detunings_rad_s"] = []
    with pytest.raises(ConfigError, match="operating.detunings_rad_s"):
        parse_config(json.dumps(doc, indent=2))


def test_physics_invariant_line():
    doc = _doc()
    doc["cavity"]["length_m"] = 0.03
    text = json.dumps(doc, indent=2)
    line = next(i for i, ln in enumerate(text.splitlines(), 1) if '"length_m"' in ln)
    with pytest.raises(ConfigError, match=rf":{line}: cavity\.length_m: unstable geometry"):
        parse_config(text, "c.json")
    doc = _doc()
    doc["mechanics"]["gamma_0_rad_s"] = 1e7
    with pytest.raises(ConfigError, match="quality factor"):
        parse_config(json.dumps(doc, indent=2))


def test_dt_guard():
    doc = _doc()
    doc["sim"]["dt_s"] = 1e-8
    with pytest.raises(ConfigError, match="sim.dt_s"):
        parse_config(json.dumps(doc, indent=2))


def test_unknown_field_rejected():
    doc = _doc()
    doc["cavity"]["finess"] = 2200
    with pytest.raises(ConfigError, match="finess"):
        parse_config(json.dumps(doc, indent=2))


def test_config_dir_env(tmp_path, monkeypatch):
    doc = _doc()
    doc["cavity"]["finesse"] = 5000
    (tmp_path / "custom.json").write_text(json.dumps(doc))
    monkeypatch.setenv(CONFIG_DIR_ENV, str(tmp_path))
    assert load_config("custom").cavity.finesse == 5000
    monkeypatch.chdir(tmp_path)
    assert load_config("custom.json").cavity.finesse == 5000
    with pytest.raises(ConfigError, match="not found"):
        load_config("nope")
