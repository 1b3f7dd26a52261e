"""Radiation-pressure backaction cooling of a micromirror in a detuned cavity."""

from .backaction import (
    PHOTOTHERMAL,
    RADIATION_PRESSURE,
    EffectiveDynamics,
    SelfEnergy,
    effective_dynamics,
    gamma_opt,
    optical_spring_shift,
    self_energy,
)
from .cavity import (
    CavityGeometry,
    MechanicalMode,
    OperatingPoint,
    OpticalCavity,
    PhotothermalParams,
    cavity_linewidth,
    intracavity_photon_number,
)
from .config import ScenarioConfig, load_config
from .errors import CalibrationError, ConfigError, FitError, InstabilityError, OptocoolError
from .fitting import DetuningDataset, FitResult, fit_detuning_curves, fit_spectrum, nls_minimize
from .langevin import SimConfig, Trajectory, oracle_effective_dynamics, simulate, welch_psd
from .pdh import PdhConfig, calibrate_effective_mass, calibrate_spectrum, synthesize_raw_spectrum
from .spectra import SpectrumSeries, mean_square_displacement, spectrum_eq1, spectrum_full
from .thermo import (
    collapse_diagnostic,
    cooling_sweep,
    effective_temperature,
    occupancy,
    sideband_threshold_check,
)

__version__ = "0.1.0"
