import numpy as np
import pytest
from scipy import stats

from distreg.design import Dataset, Linear, ModelSpec, ParamSpec, PSpline
from distreg.families import get_family
from distreg.modelsel import (ScoreReport, crps_quantile_curve, cross_validate, deviance,
                              dic, fold_assignment, pit_values, qq_pairs,
                              quantile_residuals, score_crps, score_log, score_quadratic,
                              score_spherical, squared_density_integral)
from distreg.sampler import SamplerConfig, build_model, run_chain

from conftest import FAMILY_NAMES, random_theta


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_squared_density_closed_form_vs_quadrature(name, rng):
    fam = get_family(name)
    for _ in range(5):
        th = random_theta(name, rng)
        a = squared_density_integral(fam, th)
        b = squared_density_integral(fam, th, method="quad")
        if np.isfinite(a):
            assert a == pytest.approx(b, rel=1e-7)


def test_divergent_squared_density_flagged():
    assert np.isinf(squared_density_integral("gamma", [1.0, 0.4]))
    assert np.isinf(squared_density_integral("dagum", [1.0, 1.0, 0.4]))
    assert np.isnan(score_quadratic("gamma", [1.0, 0.4], 1.0))
    assert np.isnan(score_spherical("gamma", [1.0, 0.4], 1.0))
    assert np.isfinite(score_log("gamma", [1.0, 0.4], 1.0))


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_crps_matches_energy_form(name):
    # CRPS = -(E|X - y| - E|X - X'| / 2), estimated by simulation
    rng = np.random.default_rng(5)
    fam = get_family(name)
    th = random_theta(name, rng)
    y = float(fam.rvs(th, rng))
    x1, x2 = fam.rvs(th, rng, size=400_000), fam.rvs(th, rng, size=400_000)
    terms = np.abs(x1 - y) - 0.5 * np.abs(x1 - x2)
    mc, se = -terms.mean(), terms.std() / np.sqrt(terms.size)
    assert float(score_crps(fam, th, y)) == pytest.approx(mc, abs=5 * se)


@pytest.mark.parametrize("name", FAMILY_NAMES)
def test_crps_forms_agree_and_curve_integrates(name, rng):
    fam = get_family(name)
    th = [np.array(v) for v in zip(*[random_theta(name, rng) for _ in range(10)])]
    y = fam.rvs(th, rng)
    c1 = score_crps(fam, th, y)
    c2 = score_crps(fam, th, y, method="quantile")
    assert np.all(c1 <= 0)
    assert np.allclose(c1, c2, rtol=1e-4)
    alpha, curve, w = crps_quantile_curve(fam, th, y)
    assert alpha.size == 256
    assert np.sum(w * curve) == pytest.approx(c2.mean(), rel=1e-12)


def test_crps_degenerate_limit():
    y = 2.0
    vals = [float(score_crps("lognormal", [np.log(y), s2], y)) for s2 in (1e-2, 1e-4, 1e-6)]
    assert all(v < 0 for v in vals)
    assert abs(vals[2]) < abs(vals[1]) < abs(vals[0]) and abs(vals[2]) < 1e-2


def test_scores_proper_on_toy(rng):
    # the true density beats a perturbed one in expected LS, QS, SPS and CRPS
    fam = get_family("gamma")
    true, wrong = [2.0, 3.0], [2.4, 2.0]
    y = fam.rvs(true, rng, size=3000)
    for f in (score_log, score_quadratic, score_spherical):
        assert f(fam, true, y).mean() > f(fam, wrong, y).mean()
    assert score_crps(fam, true, y[:300], method="quantile").mean() > \
        score_crps(fam, wrong, y[:300], method="quantile").mean()


def test_pit_and_residuals(rng):
    fam = get_family("dagum")
    th = [3.0, 2.0, 1.2]
    y = fam.rvs(th, rng, size=5000)
    u, nc = pit_values(y, th, fam)
    assert nc == 0 and stats.kstest(u, "uniform").pvalue > 0.01
    r, _ = quantile_residuals(y, th, fam)
    assert stats.kstest(r, "norm").pvalue > 0.01
    theo, samp = qq_pairs(r)
    assert np.all(np.diff(samp) >= 0) and theo[0] < 0 < theo[-1]
    # observations far in the tail are clamped and counted
    u, nc = pit_values(np.array([1e-30, 1.0]), [3.0, 2.0, 1.2], fam)
    assert nc == 1 and u[0] == 1e-12


def test_fold_assignment_balanced():
    lab = fold_assignment(103, 10, np.random.default_rng(0))
    counts = np.bincount(lab)
    assert counts.size == 10 and counts.max() - counts.min() <= 1
    with pytest.raises(ValueError):
        fold_assignment(5, 10, np.random.default_rng(0))


def _fit_small(seed=0):
    rng = np.random.default_rng(seed)
    n = 250
    x = rng.uniform(0, 1, n)
    y = rng.gamma(4.0, np.exp(0.3 + 0.5 * np.sin(2 * np.pi * x)) / 4.0)
    d = Dataset({"y": y, "x": x})
    spec = ModelSpec("gamma", {"mu": ParamSpec([PSpline("x", knots=8)])})
    return spec, d


def test_dic_consistency():
    spec, d = _fit_small()
    store = run_chain(build_model(spec, d), SamplerConfig(600, 200, 2, seed=1))
    res = dic(store)
    devs = [deviance(store, t=t).sum() for t in range(store.n_draws)]
    assert res.mean_deviance == pytest.approx(np.mean(devs))
    assert res.dic == pytest.approx(2 * np.mean(devs) - deviance(store).sum())
    assert 3 < res.pd < 15


def test_dic_rejects_nonfinite_deviance(monkeypatch):
    spec, d = _fit_small()
    store = run_chain(build_model(spec, d), SamplerConfig(60, 20, 1, seed=1))
    fam = store.model.family
    orig = fam._logpdf

    def broken(y, theta):
        out = orig(y, theta)
        out[7] = -np.inf
        return out

    monkeypatch.setattr(fam, "_logpdf", broken)
    with pytest.raises(FloatingPointError, match="observation 7"):
        dic(store)


def test_cross_validation_report(tmp_path):
    spec, d = _fit_small(3)
    cfg = SamplerConfig(300, 100, 2)
    rep = cross_validate(spec, d, folds=4, config=cfg, seed=9)
    rep2 = cross_validate(spec, d, folds=4, config=cfg, seed=9)
    assert [r["LS"] for r in rep.folds] == [r["LS"] for r in rep2.folds]
    assert sum(r["n"] for r in rep.folds) + rep.excluded == d.n
    assert rep.overall["LS"] == pytest.approx(np.mean([r["LS"] for r in rep.folds]))
    assert rep.pooled["CRPS"] < 0
    assert np.sum(rep.alpha_weights * rep.crps_curve) == pytest.approx(rep.pooled["CRPS"],
                                                                       rel=1e-3)
    p = tmp_path / "scores.csv"
    rep.to_csv(p)
    rows = ScoreReport.read_csv(p)
    assert [r["fold"] for r in rows] == ["0", "1", "2", "3", "overall", "pooled"]
    assert rows[4]["LS"] == rep.overall["LS"]


def test_mixture_predictive_runs():
    spec, d = _fit_small(4)
    rep = cross_validate(spec, d.subset(np.arange(80)), folds=2,
                         config=SamplerConfig(120, 60, 6), seed=1, predictive="mixture")
    assert np.isfinite(rep.pooled["LS"]) and rep.pooled["CRPS"] < 0
