"""Derived distributional quantities: conditional means, Gini, densities and bands.

Reuses the fit of 01_fit_income.py; the scale smooth in age is plotted with
pointwise and simultaneous 95% bands.
"""
import os
import runpy

import numpy as np

from distreg.derived import (conditional_quantities, effect_curve, pointwise_band,
                             posterior_mean_density, simultaneous_band)
from distreg.design import Dataset

HERE = os.path.dirname(os.path.abspath(__file__))
store = runpy.run_path(os.path.join(HERE, "01_fit_income.py"))["store"]

# Two covariate profiles that differ only in the east indicator.
profiles = {
    name: Dataset({"age": np.array([40.0]), "east": np.array([e]),
                   "region": np.array(["r0_0"], dtype=object),
                   "household": np.array(["h0"], dtype=object)},
                  categorical={"region", "household"})
    for name, e in (("east", 1.0), ("west", 0.0))
}
for name, prof in profiles.items():
    q = conditional_quantities(store, prof, 0.95, quantiles=(0.1, 0.5, 0.9))
    for key in ("mean", "gini", "q0.5"):
        s = q[key]
        print(f"{name:5s} {key:5s} {s.mean:8.3f}  [{s.lower:.3f}, {s.upper:.3f}]")
    print(f"{name:5s} undefined draws: {q['undefined']}")

# Posterior mean density against the plug-in density at the posterior mean.
dens = posterior_mean_density(store, profiles["east"])
step = dens.grid[1] - dens.grid[0]
print("density mass on grid:", round(float(dens.mean.sum() * step), 4),
      " max |mean - plugin|:", round(float(np.abs(dens.mean - dens.plugin).max()), 4))

# Pointwise and simultaneous bands for f(age); the simultaneous band is wider.
k, j = store.find_block("b:f(age)")
lo, hi = store.model.predictors[k].blocks[j].meta["range"]  # no extrapolation
grid = Dataset({"age": np.linspace(lo, hi, 60)})
curves = effect_curve(store, "b:f(age)", grid)
pw = pointwise_band(curves)
sim = simultaneous_band(curves)
print(f"mean pointwise width {np.mean(pw.upper - pw.lower):.3f}, "
      f"simultaneous width {np.mean(sim.upper - sim.lower):.3f} (q = {sim.q:.2f})")
