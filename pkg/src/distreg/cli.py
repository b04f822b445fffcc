"""Command-line driver: fit, cross-validate, score and simulate from a config file.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 input/output failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import re
import sys

import numpy as np

from .config import ConfigError, RunConfig, parse_config
from .derived import (conditional_quantities, effect_curve, pointwise_band,
                      posterior_mean_density, simultaneous_band, write_curve_csv)
from .design import AdjacencyMap, Dataset, DesignError
from .modelsel import (crps_quantile_curve, cross_validate, dic, evaluate_scores,
                       pit_values, qq_pairs, quantile_residuals, SCORE_NAMES)
from .sampler import PosteriorStore, SamplerError, build_model, run_chain
from .simulation import run_simulation

__all__ = ["main", "run_fit", "run_cv", "run_score", "run_simulate", "EXIT_CODES"]

log = logging.getLogger("distreg")

EXIT_CODES = {"ok": 0, "config": 2, "data": 3, "numeric": 4, "io": 5}


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label).strip("_")


def load_inputs(cfg: RunConfig, path: str | None = None):
    data = Dataset.from_csv(path or cfg.data, categorical=cfg.categorical)
    adj = AdjacencyMap.from_file(cfg.adjacency) if cfg.adjacency else None
    return data, adj


def _write_residuals(out, family, theta, y):
    res, n_clamp = quantile_residuals(y, theta, family)
    pit, _ = pit_values(y, theta, family)
    theo, samp = qq_pairs(res)
    with open(os.path.join(out, "qq.csv"), "w", encoding="utf-8") as fh:
        fh.write("theoretical,sample\n")
        for a, b in zip(theo, samp):
            fh.write(f"{float(a)!r},{float(b)!r}\n")
    with open(os.path.join(out, "pit.csv"), "w", encoding="utf-8") as fh:
        fh.write("index,pit,residual\n")
        for i, (u, r) in enumerate(zip(pit, res)):
            fh.write(f"{i},{float(u)!r},{float(r)!r}\n")
    return n_clamp


def _write_effects(out, store: PosteriorStore, data: Dataset, level=0.95, n_grid=100):
    written = []
    for p in store.model.predictors:
        for b in p.blocks:
            if b.kind in ("intercept", "linear"):
                continue
            col = b.meta["column"]
            if b.kind in ("pspline", "vc"):
                lo, hi = b.meta["range"]
                cols = {col: np.linspace(lo, hi, n_grid)}
                if b.kind == "vc":
                    cols[b.meta["by"]] = np.ones(n_grid)
                labels = None
            else:
                labels = list(b.meta["index"])
                cols = {col: np.array(labels, dtype=object)}
            grid_data = Dataset(cols, categorical={col} if labels is not None else ())
            curves = effect_curve(store, f"{p.name}:{b.label}", grid_data)
            pw = pointwise_band(curves, level)
            cols_out = {"mean": pw.mean, "lower": pw.lower, "upper": pw.upper}
            if curves.values.shape[0] >= 100:
                band = simultaneous_band(curves, level)
                cols_out.update(sim_lower=band.lower, sim_upper=band.upper)
            path = os.path.join(out, f"effect_{_safe_name(p.name + '_' + b.label)}.csv")
            if labels is None:
                write_curve_csv(path, curves.grid, cols_out)
            else:
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write("level," + ",".join(cols_out) + "\n")
                    for i, lab in enumerate(labels):
                        fh.write(lab + "," + ",".join(repr(float(v[i]))
                                                      for v in cols_out.values()) + "\n")
            written.append(path)
    return written


def _profile(req, data: Dataset) -> Dataset:
    cols = {}
    for c, v in req.profile.items():
        if c in data.categorical:
            cols[c] = np.array([v], dtype=object)
        else:
            try:
                cols[c] = np.array([float(v)])
            except ValueError:
                raise ConfigError(f"profile value {v!r} for numeric column {c!r}",
                                  "profile") from None
    return Dataset(cols, categorical={c for c in cols if c in data.categorical})


def _write_derived(out, cfg: RunConfig, store, data):
    for req in cfg.derived:
        prof = _profile(req, data)
        res = conditional_quantities(store, prof, req.level, req.quantiles)
        path = os.path.join(out, f"derived_{_safe_name(req.name)}.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("quantity,mean,median,lower,upper,undefined_draws\n")
            for q in (*req.quantities, *(f"q{x:g}" for x in req.quantiles)):
                if q == "density":
                    continue
                s = res.get(q)
                undef = res["undefined"].get(q, 0)
                if s is None:
                    fh.write(f"{q},nan,nan,nan,nan,{undef}\n")
                else:
                    fh.write(f"{q},{float(s.mean)!r},{float(s.median)!r},"
                             f"{float(s.lower)!r},{float(s.upper)!r},{undef}\n")
        if "density" in req.quantities:
            dens = posterior_mean_density(store, prof)
            dens.to_csv(os.path.join(out, f"derived_{_safe_name(req.name)}_density.csv"),
                        req.level)


def run_fit(cfg: RunConfig, out: str) -> PosteriorStore:
    data, adj = load_inputs(cfg)
    model = build_model(cfg.model_spec, data, adj, cfg.response)
    store = run_chain(model, cfg.sampler_config())
    store.to_csv(os.path.join(out, "draws.csv"))
    d = dic(store)
    d.to_csv(os.path.join(out, "dic.csv"))
    n_clamp = _write_residuals(out, model.family, store.params(), model.y)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"task: fit\nfamily: {cfg.family}\nn: {data.n}\n")
        fh.write(store.report.to_text())
        fh.write(f"DIC: {d.dic!r}\npd: {d.pd!r}\npit_clamped: {n_clamp}\n")
    _write_effects(out, store, data)
    _write_derived(out, cfg, store, data)
    return store


def run_score(cfg: RunConfig, out: str):
    data, adj = load_inputs(cfg)
    test = Dataset.from_csv(cfg.score_data, categorical=cfg.categorical) \
        if cfg.score_data else data
    model = build_model(cfg.model_spec, data, adj, cfg.response)
    store = run_chain(model, cfg.sampler_config())
    ok = model.in_range(test)
    sub = test.subset(ok)
    y = sub.numeric(cfg.response)
    theta = store.params(None, sub)
    scores = evaluate_scores(model.family, theta, y, cfg.cv.crps_method)
    n_clamp = _write_residuals(out, model.family, theta, y)
    with open(os.path.join(out, "scores.csv"), "w", encoding="utf-8") as fh:
        fh.write("fold,n,excluded," + ",".join(SCORE_NAMES) + "\n")
        vals = [np.nanmean(scores[s]) for s in SCORE_NAMES]
        fh.write(f"overall,{y.size},{int(np.count_nonzero(~ok))},"
                 + ",".join(repr(float(v)) for v in vals) + "\n")
    alpha, curve, _ = crps_quantile_curve(model.family, theta, y)
    with open(os.path.join(out, "crps_alpha.csv"), "w", encoding="utf-8") as fh:
        fh.write("alpha,mean_score\n")
        for a, c in zip(alpha, curve):
            fh.write(f"{float(a)!r},{float(c)!r}\n")
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"task: score\nfamily: {cfg.family}\nn_scored: {y.size}\n"
                 f"pit_clamped: {n_clamp}\n")
        fh.write(store.report.to_text())
    return scores


def run_cv(cfg: RunConfig, out: str):
    data, adj = load_inputs(cfg)
    rep = cross_validate(cfg.model_spec, data, cfg.cv.folds, cfg.sampler_config(), cfg.seed,
                         adj, cfg.response, cfg.cv.predictive, cfg.workers)
    rep.to_csv(os.path.join(out, "scores.csv"))
    rep.curve_to_csv(os.path.join(out, "crps_alpha.csv"))
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"task: cv\nfamily: {cfg.family}\nfolds: {cfg.cv.folds}\n"
                 f"excluded: {rep.excluded}\n")
        for s in SCORE_NAMES:
            fh.write(f"{s}: overall={rep.overall[s]!r} pooled={rep.pooled[s]!r} "
                     f"undefined={rep.undefined[s]}\n")
    return rep


def run_simulate(cfg: RunConfig, out: str):
    adj = AdjacencyMap.from_file(cfg.adjacency) if cfg.adjacency else None
    rep = run_simulation(cfg, cfg.seed, cfg.workers, adj)
    rep.to_csv(os.path.join(out, "simulation.csv"))
    rep.smooth_to_csv(os.path.join(out, "simulation_smooth.csv"))
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("task: simulate\n" + rep.summary_text())
    return rep


TASK_RUNNERS = {"fit": run_fit, "cv": run_cv, "score": run_score, "simulate": run_simulate}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="distreg", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, help="run configuration file")
    p.add_argument("--task", choices=sorted(TASK_RUNNERS), help="overrides the config task")
    p.add_argument("--seed", type=int, help="master seed (non-negative)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes for cv and simulate")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. sampler.iterations=2000")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _classify(exc: BaseException) -> str:
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, (DesignError, KeyError)):
        return "data"
    if isinstance(exc, (SamplerError, FloatingPointError, np.linalg.LinAlgError,
                        ArithmeticError)):
        return "numeric"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, ValueError):
        return "data"
    return "numeric"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.override)
    for flag in ("task", "seed", "out", "workers"):
        v = getattr(args, flag)
        if v is not None:
            overrides.append(f"{flag}={v}")
    out = None
    try:
        cfg = parse_config(args.config, overrides)
        out = args.out or cfg.out
        os.makedirs(out, exist_ok=True)
        TASK_RUNNERS[cfg.task](cfg, out)
    except Exception as exc:  # mapped to a documented exit code
        kind = _classify(exc)
        msg = f"error[{kind}]: {type(exc).__name__}: {exc}"
        print(msg, file=sys.stderr)
        if out is not None and os.path.isdir(out):
            try:
                with open(os.path.join(out, "error.txt"), "w", encoding="utf-8") as fh:
                    fh.write(f"kind: {kind}\ntype: {type(exc).__name__}\nmessage: {exc}\n")
            except OSError:
                pass
        return EXIT_CODES[kind]
    return 0


if __name__ == "__main__":
    sys.exit(main())
