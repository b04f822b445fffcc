import numpy as np
import pytest
from scipy import stats

from distreg.linalg import (NotPositiveDefiniteError, cholesky, cholesky_jitter,
                            fill_reducing_order, mvn_logdensity, sample_mvn_precision, solve)


def _spd(d, rng):
    A = rng.normal(size=(d, d))
    return A @ A.T + d * np.eye(d)


def test_cholesky_solve_logdet(rng):
    P = _spd(8, rng)
    f = cholesky(P)
    assert np.allclose(f.L @ f.L.T, P)
    b = rng.normal(size=8)
    assert np.allclose(f.solve(b), np.linalg.solve(P, b))
    assert f.logdet == pytest.approx(np.linalg.slogdet(P)[1])
    r = rng.normal(size=8)
    assert f.quad(r) == pytest.approx(r @ P @ r)


def test_permuted_factor_gives_same_answers(rng):
    # banded matrix in scrambled order
    d = 15
    P = np.diag(np.full(d, 4.0)) + np.diag(np.full(d - 1, -1.0), 1) + np.diag(np.full(d - 1, -1.0), -1)
    s = rng.permutation(d)
    P = P[np.ix_(s, s)]
    perm = fill_reducing_order(P)
    f = cholesky(P, perm)
    b = rng.normal(size=d)
    assert np.allclose(f.solve(b), np.linalg.solve(P, b))
    assert f.logdet == pytest.approx(np.linalg.slogdet(P)[1])
    assert mvn_logdensity(b, 0 * b, f) == pytest.approx(
        stats.multivariate_normal(np.zeros(d), np.linalg.inv(P)).logpdf(b))


def test_not_positive_definite_reports_pivot():
    P = np.diag([1.0, 2.0, -1.0, 3.0])
    with pytest.raises(NotPositiveDefiniteError) as exc:
        cholesky(P)
    assert exc.value.pivot == 2
    with pytest.raises(NotPositiveDefiniteError):
        cholesky(np.diag([1.0, 1e-14]))


def test_jitter_retry():
    with pytest.raises(NotPositiveDefiniteError):
        cholesky_jitter(-np.eye(3))
    P = np.diag([1.0, 1.0, 0.0])
    f = cholesky_jitter(P)
    assert f.jitter == pytest.approx(1e-8)


def test_sampling_moments(rng):
    P = _spd(4, rng)
    mean = rng.normal(size=4)
    draws = np.array([sample_mvn_precision(mean, P, rng) for _ in range(20000)])
    C = np.linalg.inv(P)
    se = np.sqrt(np.diag(C) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - mean) < 4 * se)
    assert np.allclose(np.cov(draws.T), C, atol=0.05 * np.abs(C).max())
    assert np.array_equal(sample_mvn_precision(mean, P, z=np.zeros(4)), mean)


def test_logdensity_matches_scipy(rng):
    P = _spd(5, rng)
    m, x = rng.normal(size=5), rng.normal(size=5)
    ref = stats.multivariate_normal(m, np.linalg.inv(P)).logpdf(x)
    assert mvn_logdensity(x, m, P) == pytest.approx(ref, rel=1e-12)
    assert np.allclose(solve(P, x), np.linalg.solve(P, x))
