"""Derived quantities of fitted conditional distributions.

Conditional means, standard deviations and Gini coefficients, posterior-mean
densities on a grid, and pointwise and simultaneous credible bands.  All
quantities are computed per posterior draw and summarized afterwards.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .design import Dataset
from .families import Family, get_family
from .sampler import PosteriorStore

__all__ = [
    "Moments",
    "dagum_moments",
    "dagum_gini",
    "family_moments_gini",
    "gini_monte_carlo",
    "CurveSamples",
    "DerivedSummary",
    "summarize",
    "pointwise_band",
    "simultaneous_band",
    "Band",
    "posterior_mean_density",
    "DensityResult",
    "effect_curve",
    "conditional_quantities",
]


@dataclass(frozen=True)
class Moments:
    """Mean and standard deviation; ``None`` marks an undefined moment."""

    mean: float | None
    sd: float | None

    @property
    def defined(self) -> bool:
        return self.mean is not None and self.sd is not None


def _scalar(theta):
    return [float(np.asarray(t).reshape(-1)[0]) if np.ndim(t) else float(t) for t in theta]


def dagum_moments(a: float, b: float, c: float) -> Moments:
    """Mean (needs ``a > 1``) and standard deviation (needs ``a > 2``) of Dagum(a, b, c)."""
    if not (a > 0 and b > 0 and c > 0):
        raise ValueError("Dagum parameters must be positive")
    if a <= 1:
        return Moments(None, None)
    lg_c = special.gammaln(c)
    mean = b * np.exp(special.gammaln(c + 1 / a) + special.gammaln(1 - 1 / a) - lg_c)
    if a <= 2:
        return Moments(float(mean), None)
    m2 = b * b * np.exp(special.gammaln(c + 2 / a) + special.gammaln(1 - 2 / a) - lg_c)
    return Moments(float(mean), float(np.sqrt(max(m2 - mean * mean, 0.0))))


def dagum_gini(a: float, b: float, c: float) -> float | None:
    """Gini coefficient of Dagum(a, b, c); ``None`` when ``a <= 1``.  Independent of ``b``."""
    if not (a > 0 and b > 0 and c > 0):
        raise ValueError("Dagum parameters must be positive")
    if a <= 1:
        return None
    lg = (special.gammaln(c) + special.gammaln(2 * c + 1 / a)
          - special.gammaln(2 * c) - special.gammaln(c + 1 / a))
    return float(np.expm1(lg))


def gini_monte_carlo(family, theta, n: int = 1_000_000, rng=None, batches: int = 20):
    """Gini from the empirical Lorenz curve of ``n`` draws, with a batch standard error."""
    fam = get_family(family)
    rng = np.random.default_rng(rng)
    theta = _scalar(theta)
    x = fam.rvs(theta, rng, size=n)

    def g(v):
        v = np.sort(v)
        m = v.size
        return float(np.dot(2.0 * np.arange(1, m + 1) - m - 1, v) / (m * v.sum()))

    est = g(x)
    parts = [g(p) for p in np.array_split(x, batches)]
    return est, float(np.std(parts, ddof=1) / np.sqrt(batches))


def _ig_gini(mu: float, s2: float) -> float:
    fam = get_family("invgauss")
    th = [mu, s2]

    def f(t):
        F = float(fam._cdf(np.array(t), th))
        return F * (1.0 - F)

    med = float(fam._ppf(np.array(0.5), th))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val = (integrate.quad(f, 0, med, epsrel=1e-11, limit=200)[0]
               + integrate.quad(f, med, np.inf, epsrel=1e-11, limit=200)[0])
    return val / mu


def family_moments_gini(family, theta):
    """``(mean, sd, gini)`` for one parameter vector; undefined entries are ``None``."""
    fam = get_family(family)
    th = _scalar(fam.check_params(theta))
    if fam.name == "dagum":
        m = dagum_moments(*th)
        return m.mean, m.sd, dagum_gini(*th)
    if fam.name == "lognormal":
        mu, s2 = th
        mean = np.exp(mu + s2 / 2)
        return float(mean), float(mean * np.sqrt(np.expm1(s2))), float(2 * special.ndtr(np.sqrt(s2 / 2)) - 1)
    if fam.name == "gamma":
        mu, k = th
        gini = np.exp(special.gammaln(k + 0.5) - special.gammaln(k + 1)) / np.sqrt(np.pi)
        return mu, mu / np.sqrt(k), float(gini)
    if fam.name == "invgauss":
        mu, s2 = th
        return mu, float(np.sqrt(mu ** 3 * s2)), _ig_gini(mu, s2)
    raise ValueError(f"no moment formulas for family {fam.name!r}")


# ---------------------------------------------------------------------------
# summaries and bands
# ---------------------------------------------------------------------------
@dataclass
class CurveSamples:
    """Per-draw function values ``values[t, g]`` on an increasing grid."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.values.shape[1] != self.grid.size:
            raise ValueError("values must have one column per grid point")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve samples contain non-finite values")


@dataclass
class DerivedSummary:
    mean: np.ndarray
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float


def summarize(draws, level: float = 0.95) -> DerivedSummary:
    """Posterior mean, median and equal-tailed interval over axis 0."""
    d = np.asarray(draws, dtype=float)
    lo, med, hi = np.quantile(d, [(1 - level) / 2, 0.5, (1 + level) / 2], axis=0)
    return DerivedSummary(d.mean(axis=0), med, lo, hi, level)


def pointwise_band(curves: CurveSamples, level: float = 0.95) -> DerivedSummary:
    return summarize(curves.values, level)


@dataclass
class Band:
    center: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    scale: np.ndarray
    q: float
    level: float
    excluded: np.ndarray  # grid points with zero posterior sd


def simultaneous_band(curves: CurveSamples, level: float = 0.95, min_draws: int = 100) -> Band:
    """Scaled max-deviation band ``m +- q s`` covering a ``level`` share of whole curves."""
    f = curves.values
    if f.shape[0] < min_draws:
        raise ValueError(f"need at least {min_draws} draws, got {f.shape[0]}")
    m = f.mean(axis=0)
    s = f.std(axis=0, ddof=1)
    excluded = s <= 1e-12 * np.maximum(np.abs(m), 1.0)
    if np.all(excluded):
        q = 0.0
    else:
        dev = np.max(np.abs(f[:, ~excluded] - m[~excluded]) / s[~excluded], axis=1)
        q = float(np.quantile(dev, level, method="inverted_cdf"))
    s = np.where(excluded, 0.0, s)
    return Band(m, m - q * s, m + q * s, s, q, level, excluded)


def write_curve_csv(path, grid, columns: dict):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["grid", *columns])
        for i, g in enumerate(grid):
            w.writerow([repr(float(g)), *[repr(float(v[i])) for v in columns.values()]])


# ---------------------------------------------------------------------------
# densities and effect curves
# ---------------------------------------------------------------------------
@dataclass
class DensityResult:
    grid: np.ndarray
    mean: np.ndarray
    plugin: np.ndarray
    curves: CurveSamples

    def to_csv(self, path, level: float = 0.95):
        s = pointwise_band(self.curves, level)
        write_curve_csv(path, self.grid, {"mean": self.mean, "lower": s.lower,
                                          "upper": s.upper, "plugin": self.plugin})


def _profile_theta(store, profile, t, extrapolate):
    return [float(p[0]) for p in store.params(t, profile, extrapolate)]


def posterior_mean_density(store: PosteriorStore, profile: Dataset, grid=None,
                           n_grid: int = 512, extrapolate: bool = False) -> DensityResult:
    """Average of the per-draw densities at a single covariate profile.

    The default grid runs from the 0.001 to the 0.999 quantile of the
    plug-in distribution (posterior mean coefficients).
    """
    if profile.n != 1:
        raise ValueError("profile must contain exactly one row")
    fam: Family = store.model.family
    plug = _profile_theta(store, profile, None, extrapolate)
    if grid is None:
        lo, hi = fam.ppf(np.array([0.001, 0.999]), plug)
        grid = np.linspace(lo, hi, n_grid)
    grid = np.asarray(grid, dtype=float)
    vals = np.empty((store.n_draws, grid.size))
    for t in range(store.n_draws):
        vals[t] = fam.pdf(grid, _profile_theta(store, profile, t, extrapolate))
    curves = CurveSamples(grid, vals)
    return DensityResult(grid, vals.mean(axis=0), fam.pdf(grid, plug), curves)


def effect_curve(store: PosteriorStore, label: str, grid_data: Dataset,
                 extrapolate: bool = False) -> CurveSamples:
    """Per-draw values of one model term evaluated at the rows of ``grid_data``.

    The first column of ``grid_data`` is used as the plotting grid.
    """
    k, j = store.find_block(label)
    vals = store.effect_draws(k, j, grid_data, extrapolate)
    block = store.model.predictors[k].blocks[j]
    col = block.meta.get("column")
    if col in grid_data and col not in grid_data.categorical:
        x = np.asarray(grid_data[col], dtype=float)
    else:
        x = np.arange(grid_data.n, dtype=float)
    return CurveSamples(x, vals)


def conditional_quantities(store: PosteriorStore, profile: Dataset, level: float = 0.95,
                           quantiles=(), extrapolate: bool = False) -> dict[str, DerivedSummary]:
    """Per-draw mean, sd, Gini and quantiles at one profile, summarized.

    Quantities undefined for some draws are dropped from the result and the
    count is stored under ``"undefined"``.
    """
    fam = store.model.family
    rows = {"mean": [], "sd": [], "gini": []}
    qs = {f"q{q:g}": [] for q in quantiles}
    undefined = dict.fromkeys(rows, 0)
    for t in range(store.n_draws):
        th = _profile_theta(store, profile, t, extrapolate)
        for name, v in zip(rows, family_moments_gini(fam, th)):
            if v is None:
                undefined[name] += 1
            else:
                rows[name].append(v)
        for q in quantiles:
            qs[f"q{q:g}"].append(float(fam.ppf(np.array(q), th)))
    out = {name: summarize(v, level) for name, v in {**rows, **qs}.items() if len(v)}
    out["undefined"] = undefined
    return out
