"""Response distributions for positive continuous data.

Each family exposes its density, cdf, quantile function and random draws on
the natural parameter scale, together with the response functions mapping
predictors to parameters and the quantities needed by the IWLS proposals:
the score ``dl/d eta_k`` and the expected working weight
``E(-d^2 l / d eta_k^2)``, both with respect to the k-th predictor.

Parameters are passed as a sequence ``theta`` with one entry per
distribution parameter; entries may be scalars or arrays that broadcast
against ``y``.

Parameterizations
-----------------
lognormal : ``(mu, sigma2)``, ``log y ~ N(mu, sigma2)``; links identity, log.
invgauss  : ``(mu, sigma2)``, mean ``mu`` and variance ``mu**3 * sigma2``.
gamma     : ``(mu, sigma)``, mean ``mu`` and shape ``sigma``.
dagum     : ``(a, b, c)``, ``F(y) = (1 + (y / b) ** -a) ** -c``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import special, stats

__all__ = [
    "Family",
    "LogNormal",
    "InverseGaussian",
    "Gamma",
    "Dagum",
    "FAMILIES",
    "get_family",
    "ETA_BOUND",
]

#: predictors of log-linked parameters are clamped to +/- this bound
ETA_BOUND = 30.0

_LOG_2PI = np.log(2.0 * np.pi)


def _collapse(x):
    """Scalar view of a constant array so costly special functions run once."""
    x = np.asarray(x)
    if x.ndim and x.size and x.flat[0] == x.min() == x.max():
        return x.flat[0], x.shape
    return x, None


def _expand(val, shape):
    return val if shape is None else np.full(shape, val)


def trigamma(x):
    """Vectorized trigamma for x > 0 (recurrence to x + 10, then asymptotic series)."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for i in range(10):
        acc += 1.0 / (x + i) ** 2
    z = x + 10.0
    iz = 1.0 / z
    iz2 = iz * iz
    tail = iz2 * iz * (1.0 / 6 - iz2 * (1.0 / 30 - iz2 * (1.0 / 42 - iz2 / 30)))
    return acc + iz + 0.5 * iz2 + tail


def _as_params(theta, k_expected):
    if len(theta) != k_expected:
        raise ValueError(f"expected {k_expected} parameters, got {len(theta)}")
    return [np.asarray(t, dtype=float) for t in theta]


class Family:
    """Base class; subclasses fill in the private ``_`` methods."""

    name: str = ""
    params: tuple[str, ...] = ()
    links: tuple[str, ...] = ()

    @property
    def n_params(self) -> int:
        return len(self.params)

    def __repr__(self):
        return f"{type(self).__name__}()"

    # -- link handling ---------------------------------------------------
    def response(self, eta, k: int):
        """Map predictor values to parameter ``k`` (clamped on log links)."""
        eta = np.asarray(eta, dtype=float)
        if self.links[k] == "identity":
            return eta
        return np.exp(np.clip(eta, -ETA_BOUND, ETA_BOUND))

    def link(self, theta_k, k: int):
        theta_k = np.asarray(theta_k, dtype=float)
        if self.links[k] == "identity":
            return theta_k
        return np.log(theta_k)

    def clamp_count(self, eta, k: int) -> int:
        if self.links[k] == "identity":
            return 0
        return int(np.count_nonzero(np.abs(eta) > ETA_BOUND))

    # -- validation ------------------------------------------------------
    def check_params(self, theta):
        theta = _as_params(theta, self.n_params)
        for name, link, t in zip(self.params, self.links, theta):
            if not np.all(np.isfinite(t)):
                raise ValueError(f"{self.name}: parameter {name} is not finite")
            if link == "log" and np.any(t <= 0):
                raise ValueError(f"{self.name}: parameter {name} must be > 0")
        return theta

    @staticmethod
    def _check_y(y):
        y = np.asarray(y, dtype=float)
        if np.any(~np.isfinite(y)) or np.any(y <= 0):
            raise ValueError("response values must be finite and > 0")
        return y

    # -- public evaluation API -------------------------------------------
    def logpdf(self, y, theta):
        return self._logpdf(self._check_y(y), self.check_params(theta))

    def pdf(self, y, theta):
        return np.exp(self.logpdf(y, theta))

    def cdf(self, y, theta):
        return self._cdf(self._check_y(y), self.check_params(theta))

    def ppf(self, p, theta):
        p = np.asarray(p, dtype=float)
        if np.any(~(p > 0) | ~(p < 1)):
            raise ValueError("probabilities must lie strictly inside (0, 1)")
        return self._ppf(p, self.check_params(theta))

    def rvs(self, theta, rng: np.random.Generator, size=None):
        theta = self.check_params(theta)
        if size is None:
            size = np.broadcast(*theta).shape
        return self._rvs(theta, rng, size)

    def score(self, y, theta, k: int):
        """Derivative of the log-density with respect to predictor ``k``."""
        self._check_k(k)
        return self._score(self._check_y(y), self.check_params(theta), k)

    def weight(self, theta, k: int):
        """Expected negative second derivative with respect to predictor ``k``."""
        self._check_k(k)
        return self._weight(self.check_params(theta), k)

    def mean(self, theta):
        return self._mean(self.check_params(theta))

    def var(self, theta):
        return self._var(self.check_params(theta))

    def _check_k(self, k):
        if not 0 <= k < self.n_params:
            raise IndexError(f"{self.name} has no parameter index {k}")

    # -- starting values -------------------------------------------------
    def moment_start(self, y) -> np.ndarray:
        """Crude predictor-scale starting values from sample moments."""
        raise NotImplementedError

    # -- hooks -----------------------------------------------------------
    def _logpdf(self, y, theta):
        raise NotImplementedError

    def _cdf(self, y, theta):
        raise NotImplementedError

    def _ppf(self, p, theta):
        raise NotImplementedError

    def _rvs(self, theta, rng, size):
        return self._ppf(rng.uniform(size=size), theta)

    def _score(self, y, theta, k):
        raise NotImplementedError

    def _weight(self, theta, k):
        raise NotImplementedError

    def _mean(self, theta):
        raise NotImplementedError

    def _var(self, theta):
        raise NotImplementedError

    def _score_weight(self, y, theta, k):
        return self._score(y, theta, k), self._weight(theta, k)


class LogNormal(Family):
    name = "lognormal"
    params = ("mu", "sigma2")
    links = ("identity", "log")

    def _logpdf(self, y, theta):
        mu, s2 = theta
        ly = np.log(y)
        return -0.5 * (_LOG_2PI + np.log(s2)) - ly - (ly - mu) ** 2 / (2.0 * s2)

    def _cdf(self, y, theta):
        mu, s2 = theta
        return special.ndtr((np.log(y) - mu) / np.sqrt(s2))

    def _ppf(self, p, theta):
        mu, s2 = theta
        return np.exp(mu + np.sqrt(s2) * special.ndtri(p))

    def _rvs(self, theta, rng, size):
        mu, s2 = theta
        return np.exp(mu + np.sqrt(s2) * rng.standard_normal(size))

    def _score(self, y, theta, k):
        mu, s2 = theta
        r = np.log(y) - mu
        if k == 0:
            return r / s2
        return -0.5 + r * r / (2.0 * s2)

    def _weight(self, theta, k):
        mu, s2 = np.broadcast_arrays(*theta)
        if k == 0:
            return 1.0 / s2
        return np.full(s2.shape, 0.5)

    def _mean(self, theta):
        mu, s2 = theta
        return np.exp(mu + 0.5 * s2)

    def _var(self, theta):
        mu, s2 = theta
        return np.expm1(s2) * np.exp(2.0 * mu + s2)

    def moment_start(self, y):
        ly = np.log(y)
        return np.array([ly.mean(), np.log(max(ly.var(), 1e-8))])


class InverseGaussian(Family):
    name = "invgauss"
    params = ("mu", "sigma2")
    links = ("log", "log")

    def _logpdf(self, y, theta):
        mu, s2 = theta
        return (-0.5 * (_LOG_2PI + np.log(s2)) - 1.5 * np.log(y)
                - (y - mu) ** 2 / (2.0 * y * mu * mu * s2))

    def _cdf(self, y, theta):
        mu, s2 = theta
        r = 1.0 / np.sqrt(s2 * y)
        first = special.ndtr(r * (y / mu - 1.0))
        # second term exp(2 / (mu s2)) * Phi(-r (y/mu + 1)) evaluated on the log scale
        second = np.exp(2.0 / (mu * s2) + special.log_ndtr(-r * (y / mu + 1.0)))
        return np.clip(first + second, 0.0, 1.0)

    def _ppf(self, p, theta):
        mu, s2 = theta
        # scipy's invgauss(m, scale=lam) has mean m * lam and shape lam
        lam = 1.0 / s2
        return stats.invgauss.ppf(p, mu / lam, scale=lam)

    def _rvs(self, theta, rng, size):
        mu, s2 = theta
        return rng.wald(np.broadcast_to(mu, size), np.broadcast_to(1.0 / s2, size))

    def _score(self, y, theta, k):
        mu, s2 = theta
        if k == 0:
            return (y - mu) / (s2 * mu * mu)
        return -0.5 + (y - mu) ** 2 / (2.0 * y * mu * mu * s2)

    def _weight(self, theta, k):
        mu, s2 = np.broadcast_arrays(*theta)
        if k == 0:
            return 1.0 / (s2 * mu)
        return np.full(mu.shape, 0.5)

    def _mean(self, theta):
        mu, s2 = np.broadcast_arrays(*theta)
        return mu.copy()

    def _var(self, theta):
        mu, s2 = theta
        return mu ** 3 * s2

    def moment_start(self, y):
        m, v = y.mean(), y.var()
        return np.array([np.log(m), np.log(max(v / m ** 3, 1e-8))])


class Gamma(Family):
    name = "gamma"
    params = ("mu", "sigma")
    links = ("log", "log")

    def _logpdf(self, y, theta):
        mu, sig = theta
        return (sig * np.log(sig / mu) + (sig - 1.0) * np.log(y)
                - special.gammaln(sig) - sig * y / mu)

    def _cdf(self, y, theta):
        mu, sig = theta
        return special.gammainc(sig, sig * y / mu)

    def _ppf(self, p, theta):
        mu, sig = theta
        return special.gammaincinv(sig, p) * mu / sig

    def _rvs(self, theta, rng, size):
        mu, sig = theta
        return rng.gamma(np.broadcast_to(sig, size), 1.0) * (mu / sig)

    def _score(self, y, theta, k):
        mu, sig = theta
        ratio = y / mu
        if k == 0:
            return sig * (ratio - 1.0)
        return sig * (np.log(sig) + 1.0 + np.log(ratio) - special.digamma(sig) - ratio)

    def _weight(self, theta, k):
        mu, sig = np.broadcast_arrays(*theta)
        if k == 0:
            return sig.copy()
        sig, shape = _collapse(sig)
        w = sig * sig * trigamma(sig) - sig
        # cancellation for very large shapes; the limit is 1/2
        return _expand(np.maximum(w, 1e-12), shape)

    def _mean(self, theta):
        mu, sig = np.broadcast_arrays(*theta)
        return mu.copy()

    def _var(self, theta):
        mu, sig = theta
        return mu * mu / sig

    def moment_start(self, y):
        m, v = y.mean(), y.var()
        return np.array([np.log(m), np.log(max(m * m / v, 1e-8))])


class Dagum(Family):
    name = "dagum"
    params = ("a", "b", "c")
    links = ("log", "log", "log")

    @staticmethod
    def _logit_s(y, a, b):
        # u = log t with t = (y/b)^a; s = t / (1 + t) = expit(u)
        return a * (np.log(y) - np.log(b))

    def _logpdf(self, y, theta):
        a, b, c = theta
        u = self._logit_s(y, a, b)
        return (np.log(a) + np.log(c) - np.log(y) + a * c * (np.log(y) - np.log(b))
                - (c + 1.0) * np.logaddexp(0.0, u))

    def _cdf(self, y, theta):
        a, b, c = theta
        u = self._logit_s(y, a, b)
        return np.exp(c * special.log_expit(u))

    def _ppf(self, p, theta):
        a, b, c = theta
        return b * np.expm1(-np.log(p) / c) ** (-1.0 / a)

    def _score(self, y, theta, k):
        a, b, c = theta
        u = self._logit_s(y, a, b)
        if k == 0:
            return 1.0 + c * u - (c + 1.0) * u * special.expit(u)
        if k == 1:
            return a * ((c + 1.0) * special.expit(u) - c)
        return 1.0 + c * special.log_expit(u)

    def _weight(self, theta, k):
        a, b, c = np.broadcast_arrays(*theta)
        if k == 0:
            c, shape = _collapse(c)
            dpsi = special.digamma(c + 1.0) - special.digamma(2.0)
            tri = trigamma(c + 1.0) + trigamma(2.0)
            return _expand(1.0 + c / (c + 2.0) * (tri + dpsi * dpsi), shape)
        if k == 1:
            return a * a * c / (c + 2.0)
        return np.ones(a.shape)

    def _mean(self, theta):
        a, b, c = theta
        with np.errstate(invalid="ignore"):
            out = b * np.exp(special.gammaln(c + 1.0 / a) + special.gammaln(1.0 - 1.0 / a)
                             - special.gammaln(c))
        return np.where(a > 1.0, out, np.inf)

    def _var(self, theta):
        a, b, c = theta
        with np.errstate(invalid="ignore"):
            m2 = b * b * np.exp(special.gammaln(c + 2.0 / a) + special.gammaln(1.0 - 2.0 / a)
                                - special.gammaln(c))
            out = m2 - self._mean(theta) ** 2
        return np.where(a > 2.0, out, np.inf)

    def moment_start(self, y):
        # a = 3 and c = 1 with b at the sample median: F(median) = 1/2 for c = 1
        return np.array([np.log(3.0), np.log(np.median(y)), 0.0])


FAMILIES: dict[str, Family] = {
    f.name: f for f in (LogNormal(), InverseGaussian(), Gamma(), Dagum())
}


def get_family(name: str | Family) -> Family:
    if isinstance(name, Family):
        return name
    try:
        return FAMILIES[name.lower()]
    except KeyError:
        raise ValueError(
            f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None


def params_from_eta(family: Family, eta: Sequence[np.ndarray]):
    """Map per-parameter predictors to natural parameters."""
    return [family.response(e, k) for k, e in enumerate(eta)]
