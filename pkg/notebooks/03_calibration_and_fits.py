# %% [markdown]
# # From detector spectra to mass and finesse
#
# A phase-modulation readout turns displacement into a voltage with a gain
# that depends on detuning. A frequency tone of known depth, injected on the
# laser, fixes that gain for every spectrum. After calibration, the mode
# area at a known bath temperature gives the effective mass. The damping
# and spring curves against detuning then pin down the finesse.

# %%
import numpy as np

from optocool import calibrate_effective_mass, calibrate_spectrum, load_config, spectrum_eq1
from optocool.cavity import OperatingPoint
from optocool.fitting import fit_detuning_curves, synthesize_detuning_dataset
from optocool.pdh import PdhConfig, synthesize_raw_spectrum, transduction_gain
from optocool.spectra import SpectrumSeries

cfg = load_config("room295K")
cav, mode = cfg.cavity, cfg.mode
pdh = PdhConfig()

# %% [markdown]
# ## Calibrating two detunings

# %%
w = np.linspace(mode.omega_m - 400 * mode.gamma_0, mode.omega_m + 400 * mode.gamma_0, 4001)
w = np.concatenate([w, [pdh.ref_freq - 50.0, pdh.ref_freq, pdh.ref_freq + 50.0]])
truth = spectrum_eq1(mode, mode.omega_m, mode.gamma_0, 295.0, grid=w)
for d in (0.0, 0.8):
    op = OperatingPoint(d * mode.omega_m, 1e-3, 295.0)
    raw = synthesize_raw_spectrum(cav, mode, op, pdh, truth)
    cal = calibrate_spectrum(raw, pdh, cav)
    line = SpectrumSeries(cal.omega[:4001], cal.psd[:4001], "synthetic-pdh")
    gain = transduction_gain(cav, pdh, op.detuning, mode.omega_m)
    print(f"detuning {d}: gain {gain:.3g}, recovered mass {calibrate_effective_mass(line, 295.0) * 1e12:.1f} ng")

# %% [markdown]
# ## Joint fit of the detuning curves
#
# Start 20% away in finesse and mass and let the damping and spring data
# pull the fit back.

# %%
det = np.linspace(0.1, 3.0, 75) * mode.omega_m
data = synthesize_detuning_dataset(cav, mode, max(cfg.powers), det, noise=0.01, rng=1)
fit = fit_detuning_curves(data, cav.with_finesse(1.2 * cav.finesse), mode.with_mass(0.8 * mode.mass))
for k in fit.names:
    print(f"{k}: {fit.params[k]:.5g} +/- {fit.std_errors[k]:.2g}")
