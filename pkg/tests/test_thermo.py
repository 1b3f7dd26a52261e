import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optocool.backaction import PHOTOTHERMAL
from optocool.cavity import CavityGeometry, OpticalCavity
from optocool.constants import hbar, k_B
from optocool.errors import ConfigError
from optocool.spectra import mean_square_displacement, spectrum_eq1
from optocool.thermo import (
    SWEEP_COLUMNS,
    SweepRow,
    collapse_diagnostic,
    cooling_law_temperature,
    cooling_sweep,
    effective_temperature,
    occupancy,
    read_sweep_csv,
    sideband_threshold_check,
    write_sweep_csv,
)

from .conftest import GAMMA_0, LENGTH, OMEGA_M


def test_effective_temperature_closure(cryo_mode):
    s = spectrum_eq1(cryo_mode, OMEGA_M, GAMMA_0, 35.0)
    assert effective_temperature(cryo_mode, OMEGA_M, mean_square_displacement(s)) == pytest.approx(35.0, rel=1e-3)


def test_cooling_law_endpoints():
    assert cooling_law_temperature(35.0, GAMMA_0, 120.7 * GAMMA_0) == pytest.approx(0.29, rel=1e-3)
    assert cooling_law_temperature(295.0, GAMMA_0, 17.4 * GAMMA_0) == pytest.approx(17.0, abs=0.05)
    assert cooling_law_temperature(35.0, GAMMA_0, 2 * np.pi * 32.47e3) == pytest.approx(0.290, rel=1e-3)
    assert cooling_law_temperature(35.0, GAMMA_0, GAMMA_0) == 35.0


@pytest.mark.parametrize("ratio", [3.0, 30.0, 120.7])
def test_cooling_law_matches_area(cryo_mode, ratio):
    g = ratio * GAMMA_0
    w = 0.99 * OMEGA_M
    s = spectrum_eq1(cryo_mode, w, g, 35.0)
    T = effective_temperature(cryo_mode, w, mean_square_displacement(s))
    assert T == pytest.approx(cooling_law_temperature(35.0, GAMMA_0, g), rel=5e-3)


def test_occupancy():
    assert occupancy(OMEGA_M, 0.29) == pytest.approx(1.0848e4, rel=1e-4)
    assert round(float(occupancy(OMEGA_M, 0.29)), -2) == 1.08e4
    # hbar omega_m / k_B is 27 uK
    assert occupancy(OMEGA_M, 1e-7) < occupancy(OMEGA_M, 1e-6) < 1e-11
    assert occupancy(OMEGA_M, 1e-8) == 0.0
    T = hbar * OMEGA_M / (k_B * np.log(2))
    assert occupancy(OMEGA_M, T) == pytest.approx(1.0, rel=1e-12)


@given(T=st.floats(1e-2, 1e3))
def test_occupancy_high_temperature_limit(T):
    x = hbar * OMEGA_M / (k_B * T)
    n = occupancy(OMEGA_M, T)
    assert n == pytest.approx(1 / x - 0.5 + x / 12, rel=1e-6, abs=1e-9) if x < 0.05 else n > 0


def test_sweep_zero_power(cryo_cavity, cryo_mode):
    rows = cooling_sweep(cryo_cavity, cryo_mode, [0.0], np.linspace(-2, 2, 9) * OMEGA_M, 35.0)
    assert all(r.T_eff == pytest.approx(35.0, rel=1e-12) for r in rows)


def test_sweep_order_and_workers(cryo_cavity, cryo_mode):
    powers = [1e-3, 7e-3]
    det = np.linspace(0, 3, 31) * OMEGA_M
    serial = cooling_sweep(cryo_cavity, cryo_mode, powers, det, 35.0)
    pooled = cooling_sweep(cryo_cavity, cryo_mode, powers, det, 35.0, workers=4)
    assert serial == pooled
    assert [r.power for r in serial] == [p for p in powers for _ in det]
    with pytest.raises(ValueError):
        cooling_sweep(cryo_cavity, cryo_mode, [], det, 35.0)


def test_sweep_argmin_regression(cryo_cavity, room_cavity, cryo_mode, room_mode):
    det = np.linspace(0.0, 3.0, 3001) * OMEGA_M
    for cav, mode, T0, P, expect in (
        (cryo_cavity, cryo_mode, 35.0, 14e-3, 1.231),
        (room_cavity, room_mode, 295.0, 3.7e-3, 1.189),
    ):
        rows = cooling_sweep(cav, mode, [P], det, T0)
        best = min(rows, key=lambda r: r.T_eff)
        assert best.detuning / OMEGA_M == pytest.approx(expect, abs=2e-3)


def test_temperature_decreases_with_power(cryo_cavity, cryo_mode):
    rows = cooling_sweep(cryo_cavity, cryo_mode, np.linspace(0, 14e-3, 15), [OMEGA_M], 35.0)
    T = [r.T_eff for r in rows]
    assert np.all(np.diff(T) < 0)


def test_unstable_rows_flagged(cryo_cavity, cryo_mode):
    rows = cooling_sweep(cryo_cavity, cryo_mode, [14e-3], [-OMEGA_M, OMEGA_M], 35.0)
    assert not rows[0].stable and np.isnan(rows[0].T_eff)
    assert rows[1].stable


def _heated(rows, T0, beta):
    # absorption heating T0(P) = T0 + beta P applied through the cooling law
    out = []
    for r in rows:
        T = (T0 + beta * r.power) * GAMMA_0 / r.gamma_eff
        out.append(SweepRow(r.power, r.detuning, r.omega_eff, r.gamma_eff, T, r.n_mean, r.stable))
    return out


def test_collapse_ideal_and_heated(cryo_cavity, cryo_mode):
    powers = [1e-3, 3.5e-3, 7e-3, 14e-3]
    rows = cooling_sweep(cryo_cavity, cryo_mode, powers, np.linspace(0, 3, 61) * OMEGA_M, 35.0)
    ideal = collapse_diagnostic(rows)
    assert ideal.slope == pytest.approx(-1.0, abs=0.01)
    assert ideal.max_residual < 0.01 and not ideal.heating_detected
    beta = 0.1 * 35.0 / max(powers)
    heated = collapse_diagnostic(_heated(rows, 35.0, beta))
    assert heated.max_residual > 0.05 and heated.heating_detected
    by_p = heated.residual_by_power
    assert by_p[14e-3] > by_p[1e-3]
    single = collapse_diagnostic(cooling_sweep(cryo_cavity, cryo_mode, [7e-3], np.linspace(0.2, 2, 10) * OMEGA_M, 35.0))
    assert single.slope == pytest.approx(-1.0, abs=1e-9)


def test_collapse_degenerate():
    row = SweepRow(1e-3, 0.0, OMEGA_M, GAMMA_0, 35.0, 1.0, True)
    with pytest.raises(ValueError):
        collapse_diagnostic([row, row])
    with pytest.raises(ValueError):
        collapse_diagnostic([SweepRow(1e-3, 0.0, OMEGA_M, -1.0, float("nan"), float("nan"), False)])


def test_threshold(cryo_cavity, cryo_mode):
    th = sideband_threshold_check(cryo_cavity, cryo_mode)
    assert th.ratio == pytest.approx(0.204, abs=1e-3) and th.passes
    low = sideband_threshold_check(OpticalCavity(CavityGeometry(LENGTH), 1000.0), cryo_mode)
    assert low.ratio == pytest.approx(0.093, abs=1e-3) and not low.passes
    # exactly at the threshold: strict inequality fails
    F = np.pi * 2.99792458e8 / LENGTH / (OMEGA_M * np.sqrt(32))
    edge = sideband_threshold_check(OpticalCavity(CavityGeometry(LENGTH), F), cryo_mode)
    assert edge.ratio == pytest.approx(edge.threshold, rel=1e-12)
    if edge.ratio == edge.threshold:
        assert not edge.passes


def test_photothermal_sweep(cryo_cavity, cryo_mode, slow_pt):
    det = np.linspace(0, 3, 61) * OMEGA_M
    rp = cooling_sweep(cryo_cavity, cryo_mode, [14e-3], det, 35.0)
    pt = cooling_sweep(cryo_cavity, cryo_mode, [14e-3], det, 35.0, PHOTOTHERMAL, slow_pt)
    rel = max(abs(a.gamma_eff - b.gamma_eff) / a.gamma_eff for a, b in zip(rp, pt))
    assert rel > 0.2


def test_sweep_csv_round_trip(tmp_path, cryo_cavity, cryo_mode):
    rows = cooling_sweep(cryo_cavity, cryo_mode, [14e-3], [-OMEGA_M, 0.0, OMEGA_M], 35.0)
    p = write_sweep_csv(rows, tmp_path / "t.csv")
    assert p.read_text().splitlines()[0] == ",".join(SWEEP_COLUMNS)
    back = read_sweep_csv(p)
    for a, b in zip(rows, back):
        np.testing.assert_array_equal(np.array(a.as_tuple()[:-1], float), np.array(b.as_tuple()[:-1], float))
        assert a.stable == b.stable
    lines = p.read_text().splitlines()
    lines[2] = lines[2].replace(lines[2].split(",")[3], "oops", 1)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ConfigError, match=r"row 3, column 4"):
        read_sweep_csv(p)


@settings(max_examples=20, deadline=None)
@given(P=st.floats(1e-4, 2e-2), d=st.floats(0.05, 3.0))
def test_cooling_law_is_eq1_area_property(P, d):
    from optocool.backaction import effective_dynamics
    from optocool.cavity import MechanicalMode, OperatingPoint

    cav = OpticalCavity(CavityGeometry(LENGTH), 2200.0)
    mode = MechanicalMode(OMEGA_M, GAMMA_0, 40e-12)
    (row,) = cooling_sweep(cav, mode, [P], [d * OMEGA_M], 35.0)
    dyn = effective_dynamics(cav, mode, OperatingPoint(d * OMEGA_M, P, 35.0))
    s = spectrum_eq1(mode, float(dyn.omega_eff), float(dyn.gamma_eff), 35.0)
    T_area = effective_temperature(mode, float(dyn.omega_eff), mean_square_displacement(s))
    assert T_area == pytest.approx(row.T_eff, rel=5e-3)
