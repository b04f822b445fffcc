"""Blockwise MCMC with IWLS proposals and Gibbs updates of smoothing variances.

One sweep updates every coefficient block of every distribution parameter
(parameter index first, then block index) by a Metropolis-Hastings step whose
proposal is the Gaussian IWLS approximation of the full conditional, then
draws every smoothing variance from its inverse-gamma full conditional.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .design import AdjacencyMap, Dataset, ModelSpec, Predictor, assemble_predictors
from .families import Family, get_family
from .linalg import NotPositiveDefiniteError, cholesky_jitter, mvn_logdensity

__all__ = [
    "SamplerConfig",
    "Model",
    "build_model",
    "ChainState",
    "Proposal",
    "Sampler",
    "PosteriorStore",
    "RunReport",
    "SamplerError",
    "gibbs_variance",
    "run_chain",
]

log = logging.getLogger(__name__)

_W_FLOOR = 1e-12


class SamplerError(RuntimeError):
    pass


@dataclass
class SamplerConfig:
    iterations: int = 12000
    burnin: int = 2000
    thin: int = 10
    seed: int | None = 0
    scan: str = "fixed"
    tau2_init: float = 10.0
    audit_every: int = 500
    audit_tol: float = 1e-8
    abort_window: int = 200
    abort_fraction: float = 0.5

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burnin < self.iterations:
            raise ValueError("burnin must satisfy 0 <= burnin < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.scan not in ("fixed", "random"):
            raise ValueError("scan must be 'fixed' or 'random'")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burnin) // self.thin


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------
@dataclass
class Model:
    family: Family
    predictors: list[Predictor]
    y: np.ndarray

    def __post_init__(self):
        self.family = get_family(self.family)
        self.y = np.asarray(self.y, dtype=float)
        if len(self.predictors) != self.family.n_params:
            raise ValueError(
                f"{self.family.name} needs {self.family.n_params} predictors, "
                f"got {len(self.predictors)}")
        if np.any(~np.isfinite(self.y)) or np.any(self.y <= 0):
            raise ValueError("response values must be finite and > 0")

    @property
    def n(self) -> int:
        return self.y.size

    def block_ids(self) -> list[tuple[int, int]]:
        return [(k, j) for k, p in enumerate(self.predictors) for j in range(len(p.blocks))]

    def labels(self) -> list[str]:
        return [f"{p.name}:{b.label}" for p in self.predictors for b in p.blocks]

    def eta(self, coefs) -> list[np.ndarray]:
        out = []
        for p, c in zip(self.predictors, coefs):
            out.append(p.eta(c) if p.blocks else np.full(self.n, p.offset))
        return out

    def eta_new(self, data: Dataset, coefs, extrapolate: bool = False):
        return [p.eta_new(data, c, extrapolate) for p, c in zip(self.predictors, coefs)]

    def params(self, coefs, data: Dataset | None = None, extrapolate: bool = False):
        eta = self.eta(coefs) if data is None else self.eta_new(data, coefs, extrapolate)
        return [self.family.response(e, k) for k, e in enumerate(eta)]

    def loglik(self, coefs) -> float:
        return float(np.sum(self.family._logpdf(self.y, self.params(coefs))))

    def in_range(self, data: Dataset) -> np.ndarray:
        ok = np.ones(data.n, dtype=bool)
        for p in self.predictors:
            for b in p.blocks:
                ok &= b.in_range(data)
        return ok


def build_model(spec: ModelSpec, data: Dataset, adj: AdjacencyMap | None = None,
                response: str = "y") -> Model:
    fam = spec.validate()
    preds = assemble_predictors(spec, data, adj)
    return Model(fam, [preds[name] for name in fam.params], data.numeric(response))


# ---------------------------------------------------------------------------
# state and storage
# ---------------------------------------------------------------------------
@dataclass
class ChainState:
    beta: list[list[np.ndarray]]
    tau2: list[list[float | None]]
    eta: list[np.ndarray]
    theta: list[np.ndarray]
    loglik: float
    iteration: int = 0
    proposed: dict = field(default_factory=dict)
    accepted: dict = field(default_factory=dict)
    aborted: dict = field(default_factory=dict)
    clamp_events: int = 0
    # score and weights of one parameter at the current state: (k, v, w)
    working: tuple | None = None

    def copy_coefs(self):
        return [[b.copy() for b in row] for row in self.beta]


@dataclass
class Proposal:
    beta: np.ndarray
    eta_k: np.ndarray
    theta_k: np.ndarray
    loglik: float
    log_fwd: float
    log_rev: float
    working: tuple | None = None


@dataclass
class RunReport:
    iterations: int
    burnin: int
    thin: int
    n_draws: int
    seed: int | None
    acceptance: dict[str, float]
    proposals: dict[str, int]
    aborts: dict[str, int]
    clamp_events: int
    audit_max_diff: float
    audits: int
    elapsed: float
    low_acceptance: list[str]

    def to_text(self) -> str:
        lines = [
            f"iterations: {self.iterations}",
            f"burnin: {self.burnin}",
            f"thin: {self.thin}",
            f"n_draws: {self.n_draws}",
            f"seed: {self.seed}",
            f"clamp_events: {self.clamp_events}",
            f"audits: {self.audits}",
            f"audit_max_diff: {self.audit_max_diff:.3e}",
            f"elapsed_seconds: {self.elapsed:.2f}",
            f"low_acceptance: {','.join(self.low_acceptance)}",
        ]
        for lab, rate in self.acceptance.items():
            lines.append(f"acceptance[{lab}]: {rate:.4f}")
        for lab, n in self.aborts.items():
            lines.append(f"aborts[{lab}]: {n}")
        return "\n".join(lines) + "\n"


class PosteriorStore:
    """Retained draws; ``beta[k][j]`` is an array of shape (draws, n_coef)."""

    def __init__(self, model: Model, beta, tau2, report: RunReport | None = None):
        self.model = model
        self.beta = beta
        self.tau2 = tau2
        self.report = report

    @property
    def n_draws(self) -> int:
        for row in self.beta:
            for arr in row:
                return arr.shape[0]
        return 0

    def coefs(self, t: int):
        return [[arr[t] for arr in row] for row in self.beta]

    def mean_coefs(self):
        return [[arr.mean(axis=0) for arr in row] for row in self.beta]

    def params(self, t: int | None = None, data: Dataset | None = None,
               extrapolate: bool = False):
        coefs = self.mean_coefs() if t is None else self.coefs(t)
        return self.model.params(coefs, data, extrapolate)

    def iter_params(self, data: Dataset | None = None, extrapolate: bool = False):
        for t in range(self.n_draws):
            yield self.params(t, data, extrapolate)

    def effect_draws(self, k: int, j: int, data: Dataset, extrapolate: bool = False):
        """Per-draw values of block ``j`` of parameter ``k`` at ``data`` rows."""
        Z = self.model.predictors[k].blocks[j].design(data, extrapolate)
        return self.beta[k][j] @ Z.T

    def find_block(self, label: str) -> tuple[int, int]:
        for k, p in enumerate(self.model.predictors):
            for j, b in enumerate(p.blocks):
                if label in (b.label, f"{p.name}:{b.label}"):
                    return k, j
        raise KeyError(label)

    # -- serialization ------------------------------------------------------
    def columns(self) -> list[str]:
        cols = []
        for p in self.model.predictors:
            for b in p.blocks:
                cols.extend(f"{p.name}:{b.label}[{i}]" for i in range(b.n_coef))
        for p in self.model.predictors:
            for b in p.blocks:
                if b.penalized:
                    cols.append(f"tau2:{p.name}:{b.label}")
        return cols

    def to_matrix(self) -> np.ndarray:
        parts = [arr for row in self.beta for arr in row]
        parts += [t[:, None] for row in self.tau2 for t in row if t is not None]
        return np.hstack(parts) if parts else np.empty((0, 0))

    def to_csv(self, path):
        M = self.to_matrix()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in M:
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path, model: Model) -> "PosteriorStore":
        with open(path, newline="", encoding="utf-8") as fh:
            r = csv.reader(fh)
            header = next(r)
            M = np.array([[float(v) for v in row] for row in r if row]).reshape(-1, len(header))
        store = cls(model, [], [])
        if header != store.columns():
            raise ValueError(f"{path}: column header does not match the model")
        pos = 0
        beta, tau2 = [], []
        for p in model.predictors:
            row = []
            for b in p.blocks:
                row.append(M[:, pos:pos + b.n_coef].copy())
                pos += b.n_coef
            beta.append(row)
        for p in model.predictors:
            row = []
            for b in p.blocks:
                if b.penalized:
                    row.append(M[:, pos].copy())
                    pos += 1
                else:
                    row.append(None)
            tau2.append(row)
        store.beta, store.tau2 = beta, tau2
        return store


# ---------------------------------------------------------------------------
# elementary updates
# ---------------------------------------------------------------------------
def gibbs_variance(beta, K, rank: int, a: float, b: float, rng: np.random.Generator) -> float:
    """Draw ``tau2 ~ IG(a + rank/2, b + beta'K beta / 2)``."""
    beta = np.asarray(beta, dtype=float)
    shape = a + 0.5 * rank
    scale = b + 0.5 * float(beta @ np.asarray(K) @ beta)
    return scale / rng.gamma(shape)


def _start_values(model: Model) -> list[float]:
    """Intercept starting values: moment guesses polished by intercept-only ML."""
    fam = model.family
    guess = fam.moment_start(model.y)
    free = [k for k, p in enumerate(model.predictors)
            if p.blocks and p.blocks[0].kind == "intercept"]
    base = np.array([p.offset for p in model.predictors], dtype=float)
    x0 = np.array([guess[k] - base[k] for k in free])

    def negll(x):
        eta = base.copy()
        eta[free] += x
        theta = [fam.response(e, k) for k, e in enumerate(eta)]
        val = -np.sum(fam._logpdf(model.y, theta))
        return val if np.isfinite(val) else 1e300

    if free:
        with np.errstate(all="ignore"):
            res = optimize.minimize(negll, x0, method="Nelder-Mead",
                                    options=dict(xatol=1e-6, fatol=1e-8, maxiter=2000))
        if np.isfinite(res.fun) and res.fun <= negll(x0):
            x0 = res.x
    out = [0.0] * len(model.predictors)
    for i, k in enumerate(free):
        out[k] = float(x0[i])
    return out


class Sampler:
    """Holds the chain state and performs the individual updates."""

    def __init__(self, model: Model, config: SamplerConfig | None = None,
                 rng: np.random.Generator | None = None):
        self.model = model
        self.config = config or SamplerConfig()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.state = self._initial_state()

    def _initial_state(self) -> ChainState:
        m = self.model
        start = _start_values(m)
        beta, tau2 = [], []
        for k, p in enumerate(m.predictors):
            row_b, row_t = [], []
            for b in p.blocks:
                coef = np.zeros(b.n_coef)
                if b.kind == "intercept":
                    coef[0] = start[k]
                row_b.append(coef)
                row_t.append(self.config.tau2_init if b.penalized else None)
            beta.append(row_b)
            tau2.append(row_t)
        eta = m.eta(beta)
        theta = [m.family.response(e, k) for k, e in enumerate(eta)]
        ll = float(np.sum(m.family._logpdf(m.y, theta)))
        ids = m.block_ids()
        return ChainState(beta, tau2, eta, theta, ll,
                          proposed=dict.fromkeys(ids, 0), accepted=dict.fromkeys(ids, 0),
                          aborted=dict.fromkeys(ids, 0))

    # -- IWLS proposal --------------------------------------------------------
    def working_quantities(self, k: int, theta):
        """Score and working weights of parameter ``k`` at parameters ``theta``."""
        v, w = self.model.family._score_weight(self.model.y, theta, k)
        w = np.maximum(np.broadcast_to(w, self.model.y.shape), _W_FLOOR)
        return v, w

    def proposal_moments(self, k: int, j: int, beta, v, w):
        """Mean and Cholesky factor of the IWLS proposal for block ``j``.

        ``v`` and ``w`` are score and working weights at the state where the
        proposal is built; the mean is ``P^{-1} Z'W(z - eta_{-j})`` written as
        ``P^{-1} (Z'WZ beta + Z'v)``.
        """
        blk = self.model.predictors[k].blocks[j]
        G = blk.gram(w)
        rhs = G @ beta + blk.rmatvec(v)
        P = G if not blk.penalized else G + blk.K / self.state.tau2[k][j]
        fac = cholesky_jitter(P)
        return fac.solve(rhs), fac

    def iwls_propose(self, k: int, j: int, z=None) -> Proposal | None:
        """Draw a proposal for block ``j`` of parameter ``k``.

        Returns ``None`` when a proposal precision cannot be factorized.
        """
        st = self.state
        fam = self.model.family
        blk = self.model.predictors[k].blocks[j]
        beta = st.beta[k][j]
        if st.working is None or st.working[0] != k:
            st.working = (k, *self.working_quantities(k, st.theta))
        try:
            mean, fac = self.proposal_moments(k, j, beta, st.working[1], st.working[2])
        except NotPositiveDefiniteError:
            return None
        if z is None:
            z = self.rng.standard_normal(beta.size)
        beta_new = mean + fac.solve_Lt(z)
        eta_k = st.eta[k] + blk.matvec(beta_new - beta)
        theta = list(st.theta)
        theta[k] = fam.response(eta_k, k)
        with np.errstate(all="ignore"):
            ll = float(np.sum(fam._logpdf(self.model.y, theta)))
        log_fwd = mvn_logdensity(beta_new, mean, fac)
        if not np.isfinite(ll):
            return Proposal(beta_new, eta_k, theta[k], ll, log_fwd, -np.inf)
        v_new, w_new = self.working_quantities(k, theta)
        try:
            mean_rev, fac_rev = self.proposal_moments(k, j, beta_new, v_new, w_new)
        except NotPositiveDefiniteError:
            return None
        log_rev = mvn_logdensity(beta, mean_rev, fac_rev)
        return Proposal(beta_new, eta_k, theta[k], ll, log_fwd, log_rev, (k, v_new, w_new))

    def log_prior(self, k: int, j: int, beta) -> float:
        blk = self.model.predictors[k].blocks[j]
        if not blk.penalized:
            return 0.0
        return -0.5 * blk.prior_quadratic(beta) / self.state.tau2[k][j]

    def log_accept_ratio(self, k: int, j: int, prop: Proposal) -> float:
        st = self.state
        beta = st.beta[k][j]
        if not np.isfinite(prop.loglik) or not np.isfinite(prop.log_rev):
            return -np.inf
        return (prop.loglik + self.log_prior(k, j, prop.beta) + prop.log_rev
                - st.loglik - self.log_prior(k, j, beta) - prop.log_fwd)

    def mh_accept(self, k: int, j: int, prop: Proposal | None, u: float | None = None) -> bool:
        st = self.state
        st.proposed[(k, j)] += 1
        if prop is None:
            st.aborted[(k, j)] += 1
            return False
        log_alpha = self.log_accept_ratio(k, j, prop)
        if u is None:
            u = self.rng.uniform()
        if not (np.log(u) < log_alpha):
            return False
        st.beta[k][j] = prop.beta
        st.eta[k] = prop.eta_k
        st.theta[k] = prop.theta_k
        st.loglik = prop.loglik
        st.working = prop.working
        st.accepted[(k, j)] += 1
        st.clamp_events += self.model.family.clamp_count(prop.eta_k, k)
        return True

    def update_block(self, k: int, j: int) -> bool:
        return self.mh_accept(k, j, self.iwls_propose(k, j))

    def update_variances(self):
        st = self.state
        for k, p in enumerate(self.model.predictors):
            for j, b in enumerate(p.blocks):
                if b.penalized:
                    st.tau2[k][j] = gibbs_variance(st.beta[k][j], b.K, b.rank, b.a, b.b,
                                                   self.rng)

    def audit(self) -> float:
        """Max abs difference between cached and recomputed predictors."""
        fresh = self.model.eta(self.state.beta)
        return max((float(np.max(np.abs(f - c))) if f.size else 0.0)
                   for f, c in zip(fresh, self.state.eta))

    def sweep(self, ids):
        if self.config.scan == "random":
            ids = [ids[i] for i in self.rng.permutation(len(ids))]
        for k, j in ids:
            self.update_block(k, j)
        self.update_variances()
        self.state.iteration += 1

    # -- full run -------------------------------------------------------------
    def run(self) -> PosteriorStore:
        cfg, m, st = self.config, self.model, self.state
        ids = m.block_ids()
        n_keep = cfg.n_retained
        beta_draws = [[np.empty((n_keep, b.n_coef)) for b in p.blocks] for p in m.predictors]
        tau_draws = [[np.empty(n_keep) if b.penalized else None for b in p.blocks]
                     for p in m.predictors]
        audit_max, audits = 0.0, 0
        window_start = dict.fromkeys(ids, 0)
        keep = 0
        t0 = time.perf_counter()
        for it in range(cfg.iterations):
            self.sweep(ids)
            if cfg.audit_every and (it + 1) % cfg.audit_every == 0:
                diff = self.audit()
                audits += 1
                audit_max = max(audit_max, diff)
                if diff > cfg.audit_tol:
                    log.warning("predictor cache drift %.3e at iteration %d", diff, it + 1)
            if cfg.abort_window and (it + 1) % cfg.abort_window == 0:
                for bid in ids:
                    n_abort = st.aborted[bid] - window_start[bid]
                    if n_abort > cfg.abort_fraction * cfg.abort_window:
                        k, j = bid
                        lab = f"{m.predictors[k].name}:{m.predictors[k].blocks[j].label}"
                        raise SamplerError(
                            f"block {lab}: {n_abort} of the last {cfg.abort_window} proposals "
                            f"could not be factorized (iteration {it + 1})")
                    window_start[bid] = st.aborted[bid]
            if it >= cfg.burnin and (it - cfg.burnin + 1) % cfg.thin == 0:
                for k, p in enumerate(m.predictors):
                    for j in range(len(p.blocks)):
                        beta_draws[k][j][keep] = st.beta[k][j]
                        if tau_draws[k][j] is not None:
                            tau_draws[k][j][keep] = st.tau2[k][j]
                keep += 1
        elapsed = time.perf_counter() - t0
        report = self._report(ids, keep, audit_max, audits, elapsed)
        return PosteriorStore(m, beta_draws, tau_draws, report)

    def _report(self, ids, n_draws, audit_max, audits, elapsed) -> RunReport:
        m, st, cfg = self.model, self.state, self.config
        acc, props, aborts, low = {}, {}, {}, []
        for k, j in ids:
            lab = f"{m.predictors[k].name}:{m.predictors[k].blocks[j].label}"
            n = st.proposed[(k, j)]
            rate = st.accepted[(k, j)] / n if n else 0.0
            acc[lab], props[lab], aborts[lab] = rate, n, st.aborted[(k, j)]
            if rate < 0.05:
                low.append(lab)
        return RunReport(cfg.iterations, cfg.burnin, cfg.thin, n_draws, cfg.seed, acc, props,
                         aborts, st.clamp_events, audit_max, audits, elapsed, low)


def run_chain(model: Model, config: SamplerConfig | None = None,
              rng: np.random.Generator | None = None) -> PosteriorStore:
    """Run one chain and return the retained draws with a run report."""
    return Sampler(model, config, rng).run()


def fit(spec: ModelSpec, data: Dataset, adj: AdjacencyMap | None = None,
        config: SamplerConfig | None = None, response: str = "y") -> PosteriorStore:
    """Assemble the model and run one chain."""
    return run_chain(build_model(spec, data, adj, response), config)
