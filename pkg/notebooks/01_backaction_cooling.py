# %% [markdown]
# # Backaction cooling of the micromirror mode
#
# Detuned cavity light delays the radiation-pressure force relative to the
# mirror motion. On the red side of the resonance (positive detuning here)
# the delayed force removes energy and widens the mechanical line.
# This script walks through the cryogenic scenario, from the cavity linewidth
# down to the mode temperature.

# %%
import numpy as np

from optocool import effective_dynamics, load_config, occupancy, sideband_threshold_check
from optocool.cavity import OperatingPoint, intracavity_photon_number
from optocool.thermo import cooling_sweep

cfg = load_config("cryo35K")
cav, mode = cfg.cavity, cfg.mode
print(f"kappa = {cav.kappa:.4g} rad/s, omega_m = {mode.omega_m:.4g} rad/s")

# %% [markdown]
# The sideband ratio sits just above the ground-state threshold.

# %%
th = sideband_threshold_check(cav, mode)
print(f"omega_m/kappa = {th.ratio:.3f} (threshold {th.threshold:.3f})")

# %% [markdown]
# ## Damping and spring versus detuning
#
# Optical damping peaks slightly beyond one mechanical frequency because
# the cavity is not deep in the resolved-sideband regime.

# %%
P = max(cfg.powers)
for d in (0.25, 0.5, 1.0, 1.23, 2.0):
    op = OperatingPoint(d * mode.omega_m, P, cfg.temperatures[0])
    dyn = effective_dynamics(cav, mode, op)
    n = intracavity_photon_number(cav, op)
    print(
        f"detuning {d:4.2f} omega_m: photons {n:.3g}, gamma_eff/gamma_0 {float(dyn.gamma_eff) / mode.gamma_0:7.1f}, "
        f"spring {(float(dyn.omega_eff) - mode.omega_m) / (2 * np.pi):+8.1f} Hz"
    )

# %% [markdown]
# ## Cooling sweep
#
# The mode temperature follows T0 gamma_0 / gamma_eff. The minimum over
# detuning sets the occupancy reached at each power.

# %%
for P in cfg.powers:
    rows = [r for r in cooling_sweep(cav, mode, [P], cfg.detunings, cfg.temperatures[0]) if r.stable]
    best = min(rows, key=lambda r: r.T_eff)
    print(
        f"P = {P * 1e3:5.1f} mW: T_eff = {best.T_eff * 1e3:7.1f} mK at {best.detuning / mode.omega_m:.2f} omega_m, "
        f"<n> = {occupancy(best.omega_eff, best.T_eff):.3g}"
    )
