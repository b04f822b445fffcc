import numpy as np
import pytest
from scipy import stats

from distreg.design import (Dataset, Linear, ModelSpec, ParamSpec, PSpline, RandomEffect)
from distreg.linalg import mvn_logdensity
from distreg.sampler import (PosteriorStore, Sampler, SamplerConfig, SamplerError,
                             build_model, gibbs_variance, run_chain)


def _data(n=300, seed=0, family="lognormal"):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, n)
    z = rng.normal(size=n)
    g = np.array([f"g{i}" for i in rng.integers(0, 8, n)], dtype=object)
    if family == "lognormal":
        y = np.exp(0.5 + np.sin(2 * np.pi * x) + 0.3 * z + rng.normal(0, 0.4, n))
    else:
        y = rng.gamma(3.0, np.exp(0.5 + 0.3 * z) / 3.0)
    return Dataset({"y": y, "x": x, "z": z, "g": g}, categorical={"g"})


def _model(family="lognormal", seed=0):
    d = _data(seed=seed, family=family)
    first = "mu"
    second = "sigma2" if family == "lognormal" else "sigma"
    spec = ModelSpec(family, {
        first: ParamSpec([Linear("z"), PSpline("x", knots=10), RandomEffect("g")]),
        second: ParamSpec([Linear("z")]),
    })
    return build_model(spec, d)


def test_gibbs_variance_distribution():
    rng = np.random.default_rng(1)
    K = np.diag([1.0, 2.0, 0.0])
    beta = np.array([0.3, -0.5, 4.0])
    draws = np.array([gibbs_variance(beta, K, 2, 0.5, 0.1, rng) for _ in range(5000)])
    ref = stats.invgamma(0.5 + 1.0, scale=0.1 + 0.5 * (0.09 + 0.5))
    assert stats.kstest(draws, ref.cdf).pvalue > 0.01


def test_proposal_moments_match_dense_formula():
    m = _model()
    s = Sampler(m, SamplerConfig(seed=3))
    k, j = 0, 2
    blk = m.predictors[k].blocks[j]
    v, w = s.working_quantities(k, s.state.theta)
    beta = np.random.default_rng(0).normal(size=blk.n_coef)
    mean, fac = s.proposal_moments(k, j, beta, v, w)
    Z = blk.Z
    P = Z.T @ (w[:, None] * Z) + blk.K / s.state.tau2[k][j]
    ref = np.linalg.solve(P, Z.T @ (w * (Z @ beta) + v))
    assert np.allclose(mean, ref)
    assert np.allclose(fac.L @ fac.L.T, P)


def test_gaussian_location_proposal_is_exact():
    # for the identity-linked log-normal location the proposal is the full conditional
    m = _model()
    s = Sampler(m, SamplerConfig(seed=4))
    for j in range(len(m.predictors[0].blocks)):
        prop = s.iwls_propose(0, j)
        assert s.log_accept_ratio(0, j, prop) == pytest.approx(0.0, abs=1e-7)
        s.mh_accept(0, j, prop, u=0.5)


def test_reverse_density_recomputed_from_scratch():
    m = _model("gamma")
    s = Sampler(m, SamplerConfig(seed=5))
    k, j = 0, 1
    old = s.state.beta[k][j].copy()
    prop = s.iwls_propose(k, j, z=np.full(old.size, 0.3))
    theta = list(s.state.theta)
    theta[k] = prop.theta_k
    v, w = m.family._score_weight(m.y, theta, k)
    mean_rev, fac_rev = s.proposal_moments(k, j, prop.beta, v, np.broadcast_to(w, m.y.shape))
    assert prop.log_rev == pytest.approx(mvn_logdensity(old, mean_rev, fac_rev))
    eta = m.eta([[b if (kk, jj) != (k, j) else prop.beta for jj, b in enumerate(row)]
                 for kk, row in enumerate(s.state.beta)])
    assert np.allclose(eta[k], prop.eta_k)


def test_run_is_reproducible_and_audited(tmp_path):
    m = _model("gamma")
    cfg = SamplerConfig(iterations=400, burnin=100, thin=3, seed=11, audit_every=100)
    a = run_chain(m, cfg)
    b = run_chain(m, cfg)
    assert a.n_draws == cfg.n_retained == 100
    assert np.array_equal(a.to_matrix(), b.to_matrix())
    assert a.report.audit_max_diff < 1e-8 and a.report.audits == 4
    p = tmp_path / "draws.csv"
    a.to_csv(p)
    back = PosteriorStore.from_csv(p, m)
    assert np.array_equal(back.to_matrix(), a.to_matrix())
    assert all(0.05 < r <= 1 for r in a.report.acceptance.values())


def test_random_scan_runs():
    m = _model("gamma", seed=2)
    st = run_chain(m, SamplerConfig(iterations=200, burnin=50, thin=1, scan="random", seed=1))
    assert st.n_draws == 150
    assert np.all(np.isfinite(st.to_matrix()))


def test_abort_rule_triggers():
    m = _model("gamma")
    s = Sampler(m, SamplerConfig(iterations=200, burnin=0, thin=1, abort_window=50, seed=0))
    s.iwls_propose = lambda k, j, z=None: None
    with pytest.raises(SamplerError, match="could not be factorized"):
        s.run()


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(iterations=10, burnin=10)
    with pytest.raises(ValueError):
        SamplerConfig(scan="sideways")
