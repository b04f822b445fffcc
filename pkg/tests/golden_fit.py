"""Shared seeded fit for the golden posterior-mean density check."""
import numpy as np

from distreg.design import Dataset, Linear, ModelSpec, ParamSpec, PSpline
from distreg.sampler import SamplerConfig, build_model, run_chain


def golden_store():
    rng = np.random.default_rng(2024)
    n = 600
    x = rng.uniform(0, 1, n)
    east = (rng.random(n) < 0.4).astype(float)
    b = np.exp(1.0 + 0.4 * np.sin(2 * np.pi * x) - 0.4 * east)
    u = rng.uniform(size=n)
    y = b * (u ** (-1 / 1.3) - 1) ** (-1 / 3.5)
    d = Dataset({"y": y, "x": x, "east": east})
    spec = ModelSpec("dagum", {"b": ParamSpec([Linear("east"), PSpline("x", knots=10)])})
    return run_chain(build_model(spec, d), SamplerConfig(1500, 500, 5, seed=77))


def profiles():
    return (Dataset({"x": np.array([0.5]), "east": np.array([1.0])}),
            Dataset({"x": np.array([0.5]), "east": np.array([0.0])}))
