import numpy as np
import pytest

from optocool.cavity import CavityGeometry, MechanicalMode, OperatingPoint, OpticalCavity, PhotothermalParams

OMEGA_M = 2 * np.pi * 557e3
GAMMA_0 = 2 * np.pi * 269.0
# flat mirror 3.49 um inside the 25 mm radius of curvature (10 um waist)
LENGTH = 0.02499651


@pytest.fixture
def geometry():
    return CavityGeometry(LENGTH)


@pytest.fixture
def cryo_cavity(geometry):
    return OpticalCavity(geometry, 2200.0, 0.245)


@pytest.fixture
def room_cavity(geometry):
    return OpticalCavity(geometry, 2300.0, 0.245)


@pytest.fixture
def cryo_mode():
    return MechanicalMode(OMEGA_M, GAMMA_0, 40e-12)


@pytest.fixture
def room_mode():
    return MechanicalMode(OMEGA_M, GAMMA_0, 125e-12)


@pytest.fixture
def cryo_op(cryo_mode):
    return OperatingPoint(cryo_mode.omega_m, 14e-3, 35.0)


@pytest.fixture
def slow_pt(cryo_mode):
    return PhotothermalParams(tau_pt=10.0 / cryo_mode.omega_m)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.REPORT, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
