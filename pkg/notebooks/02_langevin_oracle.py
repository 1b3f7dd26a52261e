# %% [markdown]
# # Time-domain check of the analytic damping
#
# The Langevin integrator evolves the intracavity field and the mirror
# together, with thermal noise on the mirror only. Fitting the simulated
# spectrum should return the analytic effective frequency and damping.
# A narrow cavity and a low-Q mode keep the run to a few seconds.

# %%
import warnings

import numpy as np
from scipy.constants import k as k_B

from optocool import effective_dynamics, oracle_effective_dynamics, simulate
from optocool.cavity import CavityGeometry, MechanicalMode, OperatingPoint, OpticalCavity
from optocool.langevin import default_config

omega_m = 2 * np.pi * 557e3
cav = OpticalCavity(CavityGeometry(0.02499651), 20000.0)
mode = MechanicalMode(omega_m, omega_m / 200, 40e-12)

# %% [markdown]
# ## Thermal equilibrium without light

# %%
op = OperatingPoint(0.0, 0.0, 300.0)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    tr = simulate(cav, mode, op, default_config(cav, mode, 0.25, seed=1))
print("m w^2 <x^2> / kT =", mode.mass * omega_m**2 * np.var(tr.x) / (k_B * 300.0))

# %% [markdown]
# ## Cooling at one mechanical frequency of detuning

# %%
for d in (0.5, 1.0):
    op = OperatingPoint(d * omega_m, 2e-5, 300.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tr = simulate(cav, mode, op, default_config(cav, mode, 0.3, seed=2))
    fit = oracle_effective_dynamics(tr)
    dyn = effective_dynamics(cav, mode, op)
    g, e = fit.params["gamma_eff"], fit.std_errors["gamma_eff"]
    print(f"detuning {d} omega_m: fitted gamma {g:.4g} +/- {e:.2g}, analytic {float(dyn.gamma_eff):.4g}")
