"""Model choice and predictive evaluation.

DIC from MCMC output, quantile residuals and PIT values, the logarithmic,
quadratic, spherical and continuous ranked probability scores (all
positively oriented: higher is better) and a k-fold cross-validation harness.
"""
from __future__ import annotations

import csv
import dataclasses
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .design import AdjacencyMap, Dataset, ModelSpec
from .families import Family, get_family
from .sampler import PosteriorStore, SamplerConfig, build_model, run_chain

__all__ = [
    "DICResult",
    "dic",
    "deviance",
    "pit_values",
    "quantile_residuals",
    "qq_pairs",
    "squared_density_integral",
    "score_log",
    "score_quadratic",
    "score_spherical",
    "score_crps",
    "crps_quantile_curve",
    "gauss_legendre_unit",
    "evaluate_scores",
    "ScoreReport",
    "cross_validate",
    "fold_assignment",
    "PIT_CLAMP",
]

PIT_CLAMP = 1e-12
SCORE_NAMES = ("QS", "LS", "SPS", "CRPS")


def _theta_at(theta, i):
    return [np.asarray(t, dtype=float)[i] if np.ndim(t) else float(t) for t in theta]


def _n_obs(y, theta):
    return np.broadcast(np.asarray(y), *[np.asarray(t) for t in theta]).shape


# ---------------------------------------------------------------------------
# DIC
# ---------------------------------------------------------------------------
@dataclass
class DICResult:
    dic: float
    pd: float
    mean_deviance: float
    deviance_at_mean: float

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["DIC", "pd", "mean_deviance", "deviance_at_mean"])
            w.writerow([repr(v) for v in dataclasses.astuple(self)])


def deviance(store: PosteriorStore, coefs=None, t: int | None = None) -> np.ndarray:
    """Per-observation deviance ``-2 log p(y_i | theta_i)``."""
    m = store.model
    if coefs is None:
        coefs = store.coefs(t) if t is not None else store.mean_coefs()
    with np.errstate(all="ignore"):
        return -2.0 * m.family._logpdf(m.y, m.params(coefs))


def dic(store: PosteriorStore) -> DICResult:
    """``DIC = 2 mean(D(theta)) - D(mean theta)`` with ``pd`` the difference."""
    if store.n_draws < 2:
        raise ValueError("DIC needs at least two retained draws")
    devs = np.array([deviance(store, t=t).sum() for t in range(store.n_draws)])
    d_bar = deviance(store)
    bad = np.flatnonzero(~np.isfinite(d_bar))
    if bad.size:
        raise FloatingPointError(
            f"deviance at the posterior mean is not finite for observation {bad[0]}")
    mean_dev = float(devs.mean())
    at_mean = float(d_bar.sum())
    return DICResult(2.0 * mean_dev - at_mean, mean_dev - at_mean, mean_dev, at_mean)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------
def pit_values(y, theta, family: Family | str, clamp: float = PIT_CLAMP):
    """PIT values ``F(y_i | theta_i)`` clamped to ``[clamp, 1 - clamp]``.

    Returns the clamped values and the number of clamped entries.
    """
    fam = get_family(family)
    u = fam.cdf(y, theta)
    n_clamped = int(np.count_nonzero((u < clamp) | (u > 1.0 - clamp)))
    return np.clip(u, clamp, 1.0 - clamp), n_clamped


def quantile_residuals(y, theta, family: Family | str, clamp: float = PIT_CLAMP):
    """Quantile residuals ``Phi^{-1}(F(y_i | theta_i))`` and the clamp count."""
    u, n_clamped = pit_values(y, theta, family, clamp)
    return special.ndtri(u), n_clamped


def qq_pairs(residuals):
    """Sorted residuals against standard normal plotting positions."""
    r = np.sort(np.asarray(residuals, dtype=float))
    n = r.size
    theo = special.ndtri((np.arange(1, n + 1) - 0.5) / n)
    return theo, r


# ---------------------------------------------------------------------------
# scoring rules
# ---------------------------------------------------------------------------
def _sq_closed(fam: Family, theta):
    """Closed forms of the integral of p(y)^2 over (0, inf); ``None`` if unavailable."""
    if fam.name == "lognormal":
        mu, s2 = theta
        return np.exp(-mu + s2 / 4.0) / (2.0 * np.sqrt(np.pi * s2))
    if fam.name == "gamma":
        mu, sig = theta
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.exp(2.0 * sig * np.log(sig / mu) + special.gammaln(2.0 * sig - 1.0)
                         - 2.0 * special.gammaln(sig) - (2.0 * sig - 1.0) * np.log(2.0 * sig / mu))
        return np.where(sig > 0.5, val, np.inf)
    if fam.name == "dagum":
        a, b, c = theta
        p = 2.0 * c - 1.0 / a
        with np.errstate(invalid="ignore"):
            val = a * c * c / b * np.exp(special.betaln(np.where(p > 0, p, 1.0), 2.0 + 1.0 / a))
        return np.where(p > 0, val, np.inf)
    return None


def _sq_quad(fam: Family, theta_i) -> float:
    med = float(fam._ppf(np.array(0.5), theta_i))

    def f(t):
        return np.exp(2.0 * fam._logpdf(np.array(t), theta_i)) if t > 0 else 0.0

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        lo, err_lo = integrate.quad(f, 0.0, med, epsrel=1e-10, epsabs=0, limit=200)
        hi, err_hi = integrate.quad(f, med, np.inf, epsrel=1e-10, epsabs=0, limit=200)
    val = lo + hi
    if not np.isfinite(val) or err_lo + err_hi > 1e-6 * max(val, 1e-300):
        return np.inf
    return val


def squared_density_integral(family, theta, method: str = "auto") -> np.ndarray:
    """``int_0^inf p(y)^2 dy`` per observation; ``inf`` marks divergence."""
    fam = get_family(family)
    theta = fam.check_params(theta)
    shape = np.broadcast(*theta).shape
    if method not in ("auto", "quad"):
        raise ValueError("method must be 'auto' or 'quad'")
    if method == "auto":
        closed = _sq_closed(fam, [np.broadcast_to(t, shape) for t in theta])
        if closed is not None:
            return np.asarray(closed, dtype=float)
    bt = [np.broadcast_to(t, shape) for t in theta]
    out = np.empty(shape)
    for idx in np.ndindex(shape):
        out[idx] = _sq_quad(fam, [t[idx] for t in bt])
    return out


def score_log(family, theta, y):
    return get_family(family).logpdf(y, theta)


def score_quadratic(family, theta, y, sq=None):
    """``2 p(y) - int p^2``; ``nan`` where the integral diverges."""
    fam = get_family(family)
    sq = squared_density_integral(fam, theta) if sq is None else sq
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(sq), 2.0 * fam.pdf(y, theta) - sq, np.nan)


def score_spherical(family, theta, y, sq=None):
    """``p(y) / sqrt(int p^2)``; ``nan`` where the integral diverges."""
    fam = get_family(family)
    sq = squared_density_integral(fam, theta) if sq is None else sq
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(sq), fam.pdf(y, theta) / np.sqrt(sq), np.nan)


def gauss_legendre_unit(n: int = 256):
    """Gauss-Legendre nodes and weights on (0, 1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _crps_cdf_one(fam: Family, theta_i, y: float) -> float:
    def below(t):
        return float(fam._cdf(np.array(t), theta_i)) ** 2 if t > 0 else 0.0

    def above(t):
        return (1.0 - float(fam._cdf(np.array(t), theta_i))) ** 2

    med = float(fam._ppf(np.array(0.5), theta_i))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if y <= med:
            lo = integrate.quad(below, 0.0, y, epsrel=1e-10, epsabs=0, limit=200)[0]
            hi = (integrate.quad(above, y, med, epsrel=1e-10, epsabs=0, limit=200)[0]
                  + integrate.quad(above, med, np.inf, epsrel=1e-10, epsabs=0, limit=200)[0])
        else:
            lo = (integrate.quad(below, 0.0, med, epsrel=1e-10, epsabs=0, limit=200)[0]
                  + integrate.quad(below, med, y, epsrel=1e-10, epsabs=0, limit=200)[0])
            hi = integrate.quad(above, y, np.inf, epsrel=1e-10, epsabs=0, limit=200)[0]
    return -(lo + hi)


def _crps_integrand(q, y, alpha):
    return (np.where(y <= q, 1.0, 0.0) - alpha) * (q - y)


def score_crps(family, theta, y, method: str = "cdf", nodes: int = 256):
    """Continuous ranked probability score, ``<= 0`` with 0 best.

    ``method="cdf"`` integrates the squared cdf difference adaptively;
    ``method="quantile"`` integrates the quantile-loss form over quantile
    levels with a fixed Gauss-Legendre rule of ``nodes`` points.
    """
    fam = get_family(family)
    theta = fam.check_params(theta)
    y = fam._check_y(y)
    shape = _n_obs(y, theta)
    yb = np.broadcast_to(y, shape)
    bt = [np.broadcast_to(t, shape) for t in theta]
    if method == "cdf":
        out = np.empty(shape)
        for idx in np.ndindex(shape):
            out[idx] = _crps_cdf_one(fam, [t[idx] for t in bt], float(yb[idx]))
        return out
    if method == "quantile":
        alpha, w = gauss_legendre_unit(nodes)
        contrib = _quantile_contributions(fam, bt, yb, alpha)
        return -2.0 * np.tensordot(contrib, w, axes=([-1], [0]))
    raise ValueError("method must be 'cdf' or 'quantile'")


def _quantile_contributions(fam, theta, y, alpha):
    th = [np.asarray(t)[..., None] for t in theta]
    q = fam._ppf(np.broadcast_to(alpha, np.shape(y) + alpha.shape), th)
    if not np.all(np.isfinite(q)):
        raise FloatingPointError("quantile evaluation failed")
    return _crps_integrand(q, np.asarray(y)[..., None], alpha)


def crps_quantile_curve(family, theta, y, nodes: int = 256):
    """Mean per-level CRPS contribution across observations.

    Returns ``(alpha, curve, weights)`` where ``sum(weights * curve)`` is the
    average quantile-form CRPS.
    """
    fam = get_family(family)
    theta = fam.check_params(theta)
    y = fam._check_y(y)
    shape = _n_obs(y, theta)
    alpha, w = gauss_legendre_unit(nodes)
    contrib = _quantile_contributions(fam, [np.broadcast_to(t, shape) for t in theta],
                                      np.broadcast_to(y, shape), alpha)
    curve = -2.0 * contrib.reshape(-1, alpha.size).mean(axis=0)
    return alpha, curve, w


def evaluate_scores(family, theta, y, crps_method: str = "cdf") -> dict[str, np.ndarray]:
    """Per-observation QS, LS, SPS and CRPS."""
    fam = get_family(family)
    sq = squared_density_integral(fam, theta)
    return {
        "QS": score_quadratic(fam, theta, y, sq),
        "LS": score_log(fam, theta, y),
        "SPS": score_spherical(fam, theta, y, sq),
        "CRPS": score_crps(fam, theta, y, method=crps_method),
    }


def _mixture_scores(fam: Family, draws, y) -> dict[str, np.ndarray]:
    """Scores of the posterior predictive mixture ``mean_t p(y | theta_t)``."""
    y = np.asarray(y, dtype=float)
    T = len(draws)
    out = {k: np.empty(y.size) for k in SCORE_NAMES}
    for i in range(y.size):
        th = [np.array([d[k][i] for d in draws]) for k in range(fam.n_params)]

        def pdf(t):
            return float(np.mean(np.exp(fam._logpdf(np.full(T, t), th)))) if t > 0 else 0.0

        def cdf(t):
            return float(np.mean(fam._cdf(np.full(T, t), th))) if t > 0 else 0.0

        med = float(np.median(fam._ppf(np.full(T, 0.5), th)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            sq = (integrate.quad(lambda t: pdf(t) ** 2, 0, med, limit=200)[0]
                  + integrate.quad(lambda t: pdf(t) ** 2, med, np.inf, limit=200)[0])
            lo = integrate.quad(lambda t: cdf(t) ** 2, 0, y[i], limit=200)[0]
            hi = integrate.quad(lambda t: (1 - cdf(t)) ** 2, y[i], np.inf, limit=200)[0]
        p = pdf(y[i])
        out["LS"][i] = np.log(p)
        out["QS"][i] = 2 * p - sq
        out["SPS"][i] = p / np.sqrt(sq)
        out["CRPS"][i] = -(lo + hi)
    return out


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------
@dataclass
class ScoreReport:
    """Fold-wise and overall average scores.

    ``overall`` averages the fold averages; ``pooled`` averages all scored
    observations directly.
    """

    folds: list[dict]
    overall: dict
    pooled: dict
    alpha: np.ndarray
    crps_curve: np.ndarray
    alpha_weights: np.ndarray
    excluded: int = 0
    undefined: dict = field(default_factory=dict)

    def to_csv(self, path):
        cols = ["fold", "n", "excluded", *SCORE_NAMES]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for row in self.folds:
                w.writerow([row[c] if c in ("fold", "n", "excluded") else repr(float(row[c]))
                            for c in cols])
            for name, agg in (("overall", self.overall), ("pooled", self.pooled)):
                w.writerow([name, agg["n"], agg["excluded"],
                            *[repr(float(agg[s])) for s in SCORE_NAMES]])

    def curve_to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "mean_score"])
            for a, c in zip(self.alpha, self.crps_curve):
                w.writerow([repr(float(a)), repr(float(c))])

    @staticmethod
    def read_csv(path) -> list[dict]:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            for s in SCORE_NAMES:
                r[s] = float(r[s])
            r["n"], r["excluded"] = int(r["n"]), int(r["excluded"])
        return rows


def fold_assignment(n: int, folds: int, rng: np.random.Generator) -> np.ndarray:
    """Random fold labels ``0..folds-1`` with sizes differing by at most one."""
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    labels = np.empty(n, dtype=int)
    labels[rng.permutation(n)] = np.arange(n) % folds
    return labels


def score_holdout(store: PosteriorStore, test: Dataset, response: str = "y",
                  predictive: str = "plugin", crps_method: str = "cdf"):
    """Score held-out rows; rows needing extrapolation are excluded.

    Returns per-observation scores, the scored mask and the (plug-in)
    parameters of the scored rows.
    """
    m = store.model
    ok = m.in_range(test)
    sub = test.subset(ok)
    y = sub.numeric(response)
    theta = store.params(None, sub)
    if predictive == "plugin":
        scores = evaluate_scores(m.family, theta, y, crps_method)
    elif predictive == "mixture":
        scores = _mixture_scores(m.family, list(store.iter_params(sub)), y)
    else:
        raise ValueError("predictive must be 'plugin' or 'mixture'")
    return scores, ok, theta


def _fold_job(args):
    spec, train, test, adj, config, response, predictive = args
    model = build_model(spec, train, adj, response)
    store = run_chain(model, config)
    scores, ok, theta = score_holdout(store, test, response, predictive)
    y = test.subset(ok).numeric(response)
    _, curve, _ = crps_quantile_curve(model.family, theta, y) if y.size else (None, None, None)
    return scores, int(np.count_nonzero(~ok)), curve, y.size


def cross_validate(spec: ModelSpec, data: Dataset, folds: int = 10,
                   config: SamplerConfig | None = None, seed: int = 0,
                   adj: AdjacencyMap | None = None, response: str = "y",
                   predictive: str = "plugin", workers: int = 1) -> ScoreReport:
    """k-fold cross-validation with a fresh chain per fold.

    Fold labels and per-fold chain seeds both derive from ``seed``.
    """
    config = config or SamplerConfig()
    ss = np.random.SeedSequence(seed)
    assign_ss, *fold_ss = ss.spawn(folds + 1)
    labels = fold_assignment(data.n, folds, np.random.default_rng(assign_ss))
    jobs = []
    for f in range(folds):
        cfg = dataclasses.replace(config, seed=int(fold_ss[f].generate_state(1)[0]))
        jobs.append((spec, data.subset(labels != f), data.subset(labels == f), adj, cfg,
                     response, predictive))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_fold_job, jobs))
    else:
        results = [_fold_job(j) for j in jobs]

    alpha, w = gauss_legendre_unit(256)
    fold_rows, pooled_vals = [], {s: [] for s in SCORE_NAMES}
    undefined = dict.fromkeys(SCORE_NAMES, 0)
    curve_sum, n_scored, excluded_total = np.zeros(alpha.size), 0, 0
    for f, (scores, excluded, curve, n_ok) in enumerate(results):
        row = {"fold": f, "n": n_ok, "excluded": excluded}
        for s in SCORE_NAMES:
            vals = np.asarray(scores[s], dtype=float)
            fin = np.isfinite(vals)
            undefined[s] += int(np.count_nonzero(~fin))
            row[s] = float(vals[fin].mean()) if fin.any() else float("nan")
            pooled_vals[s].append(vals[fin])
        fold_rows.append(row)
        excluded_total += excluded
        if curve is not None:
            curve_sum += curve * n_ok
            n_scored += n_ok
    overall = {"n": n_scored, "excluded": excluded_total}
    pooled = {"n": n_scored, "excluded": excluded_total}
    for s in SCORE_NAMES:
        overall[s] = float(np.nanmean([r[s] for r in fold_rows]))
        allv = np.concatenate(pooled_vals[s])
        pooled[s] = float(allv.mean()) if allv.size else float("nan")
    curve = curve_sum / max(n_scored, 1)
    return ScoreReport(fold_rows, overall, pooled, alpha, curve, w, excluded_total, undefined)
