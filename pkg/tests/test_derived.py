import csv
import os

import numpy as np
import pytest
from scipy import integrate

from distreg.derived import (CurveSamples, conditional_quantities, dagum_gini, dagum_moments,
                             family_moments_gini, gini_monte_carlo, pointwise_band,
                             posterior_mean_density, simultaneous_band, summarize)
from distreg.design import Dataset, ModelSpec, ParamSpec
from distreg.families import get_family
from distreg.sampler import SamplerConfig, build_model, run_chain

from conftest import FAMILY_NAMES, random_theta
from golden_fit import golden_store, profiles

HERE = os.path.dirname(__file__)


def test_dagum_loglogistic_mean():
    assert dagum_moments(2.0, 1.0, 1.0).mean == pytest.approx(np.pi / 2, rel=1e-12)
    assert dagum_moments(2.0, 1.0, 1.0).sd is None
    assert not dagum_moments(1.0, 1.0, 1.0).defined
    assert dagum_gini(1.0, 1.0, 1.0) is None


def test_dagum_moments_vs_quadrature(rng):
    fam = get_family("dagum")
    for _ in range(10):
        a, b, c = rng.uniform(2.2, 6), np.exp(rng.uniform(-1, 2)), rng.uniform(0.3, 3)
        m = dagum_moments(a, b, c)
        f = lambda y, p: y ** p * float(fam.pdf(y, [a, b, c]))
        q1 = integrate.quad(f, 0, np.inf, args=(1,), limit=400, epsrel=1e-12)[0]
        q2 = integrate.quad(f, 0, np.inf, args=(2,), limit=400, epsrel=1e-12)[0]
        assert m.mean == pytest.approx(q1, rel=1e-6)
        assert m.sd == pytest.approx(np.sqrt(q2 - q1 ** 2), rel=1e-6)


def test_gini_special_cases_and_invariance(rng):
    assert dagum_gini(2.0, 1.0, 1.0) == pytest.approx(0.5, rel=1e-12)
    for _ in range(10):
        a, b, c = random_theta("dagum", rng)
        assert dagum_gini(a, b, c) == dagum_gini(a, 2 * b, c)
    mu, k = 2.0, 1.7
    assert family_moments_gini("gamma", [mu, k])[2] == family_moments_gini("gamma", [5 * mu, k])[2]
    assert family_moments_gini("lognormal", [0.0, 1e-10])[2] == pytest.approx(0, abs=1e-5)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_family_gini_vs_lorenz_monte_carlo(name):
    rng = np.random.default_rng(8)
    th = random_theta(name, rng)
    if name == "dagum":
        th[0] = max(th[0], 2.5)
    _, _, g = family_moments_gini(name, th)
    est, se = gini_monte_carlo(name, th, n=400_000, rng=rng)
    assert 0 < g < 1
    assert g == pytest.approx(est, abs=max(5 * se, 2e-3))


@pytest.mark.parametrize("name", ["lognormal", "gamma", "invgauss"])
def test_family_mean_sd_vs_quadrature(name, rng):
    fam = get_family(name)
    th = random_theta(name, rng)
    m, sd, _ = family_moments_gini(name, th)
    f = lambda y, p: y ** p * float(fam.pdf(y, th))
    q1 = integrate.quad(f, 0, np.inf, args=(1,), limit=400)[0]
    q2 = integrate.quad(f, 0, np.inf, args=(2,), limit=400)[0]
    assert m == pytest.approx(q1, rel=1e-6)
    assert sd == pytest.approx(np.sqrt(q2 - q1 ** 2), rel=1e-6)


def test_simultaneous_band_properties(rng):
    grid = np.linspace(0, 1, 40)
    base = np.sin(2 * np.pi * grid)
    f = base + rng.normal(size=(2000, 1)) * 0.2 + rng.normal(size=(2000, 40)) * 0.1
    curves = CurveSamples(grid, f)
    band = simultaneous_band(curves, 0.95)
    inside = np.all((f >= band.lower) & (f <= band.upper), axis=1)
    assert inside.mean() >= 0.95
    pw = pointwise_band(curves, 0.95)
    assert np.all(band.lower <= pw.lower) and np.all(band.upper >= pw.upper)
    # symmetric pointwise band with scaled quantiles is always nested
    dev = np.abs(f - band.center) / band.scale
    q_point = np.quantile(dev, 0.95, axis=0, method="inverted_cdf")
    assert np.all(q_point <= band.q + 1e-12)


def test_simultaneous_band_constant_curves():
    grid = np.arange(5.0)
    curves = CurveSamples(grid, np.tile(grid ** 2, (150, 1)))
    band = simultaneous_band(curves)
    assert np.all(band.excluded)
    assert np.array_equal(band.lower, grid ** 2) and np.array_equal(band.upper, grid ** 2)
    with pytest.raises(ValueError):
        simultaneous_band(CurveSamples(grid, np.ones((10, 5))))


def test_curve_samples_validation():
    with pytest.raises(ValueError):
        CurveSamples([0, 0, 1], np.ones((2, 3)))
    with pytest.raises(ValueError):
        CurveSamples([0, 1], [[np.nan, 1]])


@pytest.fixture(scope="module")
def golden():
    return golden_store()


def test_density_integrates_and_single_draw_plugin(golden):
    east, west = profiles()
    res = posterior_mean_density(golden, east)
    assert res.grid.size == 512
    wide = np.linspace(1e-4, 60, 20000)
    full = posterior_mean_density(golden, east, wide)
    assert np.trapezoid(full.mean, wide) == pytest.approx(1, abs=1e-3)
    assert np.trapezoid(full.plugin, wide) == pytest.approx(1, abs=1e-3)
    one = type(golden)(golden.model, [[b[:1] for b in row] for row in golden.beta],
                       [[None if t is None else t[:1] for t in row] for row in golden.tau2])
    r1 = posterior_mean_density(one, east, wide[:200])
    assert np.allclose(r1.mean, posterior_mean_density(one, east, wide[:200]).curves.values[0])
    theta = [float(p[0]) for p in one.params(0, east)]
    assert np.allclose(r1.mean, get_family("dagum").pdf(wide[:200], theta))


def test_density_matches_golden_curve(golden):
    with open(os.path.join(HERE, "data", "golden_density.csv")) as fh:
        rows = list(csv.DictReader(fh))
    grid = np.array([float(r["grid"]) for r in rows])
    east, west = profiles()
    de = posterior_mean_density(golden, east, grid).mean
    dw = posterior_mean_density(golden, west, grid).mean
    assert np.allclose(de, [float(r["east"]) for r in rows], rtol=1e-9, atol=1e-14)
    assert np.allclose(dw, [float(r["west"]) for r in rows], rtol=1e-9, atol=1e-14)
    assert np.max(np.abs(de - dw)) > 0.1


def test_lognormal_mean_interval_maps_through_exp():
    rng = np.random.default_rng(3)
    y = np.exp(rng.normal(1.0, 0.5, 200))
    d = Dataset({"y": y})
    s2 = 0.25
    spec = ModelSpec("lognormal", {"sigma2": ParamSpec(intercept=False, offset=np.log(s2))})
    # 401 draws puts the 2.5%, 50% and 97.5% quantiles on order statistics
    store = run_chain(build_model(spec, d), SamplerConfig(601, 200, 1, seed=2))
    assert store.n_draws == 401
    prof = Dataset({"z": np.zeros(1)})
    res = conditional_quantities(store, prof)
    mu = store.beta[0][0][:, 0]
    ref = summarize(mu)
    assert res["mean"].lower == pytest.approx(np.exp(ref.lower + s2 / 2), rel=1e-12)
    assert res["mean"].upper == pytest.approx(np.exp(ref.upper + s2 / 2), rel=1e-12)
    assert res["mean"].median == pytest.approx(np.exp(ref.median + s2 / 2), rel=1e-12)
    assert res["mean"].mean == pytest.approx(np.mean(np.exp(mu + s2 / 2)), rel=1e-12)
