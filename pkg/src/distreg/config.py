"""Run configuration files.

A config is a plain text file of ``key = value`` lines grouped in sections.
Lines starting with ``#`` are comments.  Top-level keys come before the
first section::

    family = dagum
    data = income.csv
    adjacency = regions.adj
    response = y
    categorical = region, id
    seed = 1

    [sampler]
    iterations = 12000
    burnin = 2000
    thin = 10

    [param b]
    intercept = true
    term = linear east
    term = pspline age knots=20 degree=3 order=2
    term = mrf region a=0.001 b=0.001

    [cv]
    folds = 10

    [derived east40]
    profile = age=40, east=1
    quantities = mean, sd, gini, density
    quantiles = 0.1, 0.5, 0.9

    [simulation]
    n = 2000
    replicates = 20
    candidates = dagum, gamma
    covariate x = uniform 0 1
    covariate d = binary
    truth b = 1 + 0.5*sin(2*pi*x) + 0.3*d
    truth a = log(3)
    smooth b f(x) = 0.5*sin(2*pi*x)

Term lines read ``term = <type> <column> [key=value ...]`` with types
``linear``, ``pspline``, ``vc`` (needs ``by=``), ``random``, ``mrf`` and
``spatial`` (``covariates=c1;c2``, ``structured=``, ``unstructured=``).
Relative paths are resolved against the directory of the config file.
"""
from __future__ import annotations

import ast
import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .design import TERM_TYPES, ModelSpec, ParamSpec, Spatial
from .families import FAMILIES
from .sampler import SamplerConfig

__all__ = [
    "ConfigError",
    "RunConfig",
    "CVSettings",
    "DerivedRequest",
    "SimulationScenario",
    "parse_config",
    "parse_config_text",
    "serialize_config",
    "safe_eval",
    "TASKS",
]

TASKS = ("fit", "cv", "simulate", "score")
_REPEATABLE = {"term", "covariate", "truth", "smooth"}
_TOP_KEYS = {"family", "data", "adjacency", "response", "categorical", "task", "seed",
             "out", "workers", "score_data"}
_SAMPLER_KEYS = {f.name for f in dataclasses.fields(SamplerConfig)} - {"seed"}
_PARAM_KEYS = {"intercept", "offset", "term"}
_CV_KEYS = {"folds", "predictive", "crps_method"}
_DERIVED_KEYS = {"profile", "quantities", "quantiles", "level"}
_SIM_KEYS = {"family", "n", "replicates", "candidates", "covariate", "truth", "smooth",
             "level", "regions"}
_QUANTITIES = {"mean", "sd", "gini", "density"}


class ConfigError(ValueError):
    def __init__(self, msg: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)
        self.key = key
        self.line = line


# ---------------------------------------------------------------------------
# safe expressions for simulation truths
# ---------------------------------------------------------------------------
_FUNCS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
    "abs": np.abs, "tanh": np.tanh, "expit": lambda x: 1.0 / (1.0 + np.exp(-x)),
    # named test functions on [0, 1]
    "wave": lambda x: np.sin(2 * np.pi * x),
    "bump": lambda x: np.exp(-50.0 * (x - 0.5) ** 2),
    "ramp": lambda x: np.clip(x, 0.0, 1.0),
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
           ast.Div: np.divide, ast.Pow: np.power}


def safe_eval(expr: str, env: dict[str, np.ndarray]):
    """Evaluate an arithmetic expression over named arrays.

    Allowed: numbers, ``+ - * / **``, unary minus, the functions in
    ``_FUNCS``, the constants ``pi`` and ``e`` and the names in ``env``.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {expr!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return np.asarray(env[node.id], dtype=float)
            if node.id in _CONSTS:
                return _CONSTS[node.id]
            raise ValueError(f"unknown name {node.id!r} in {expr!r}")
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords and len(node.args) == 1):
            return _FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported construct in {expr!r}")

    return ev(tree)


def _expr_names(expr: str) -> set[str]:
    tree = ast.parse(expr, mode="eval")
    called = {n.func.id for n in ast.walk(tree) if isinstance(n, ast.Call)
              and isinstance(n.func, ast.Name)}
    return {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - called - set(_CONSTS)


# ---------------------------------------------------------------------------
# config objects
# ---------------------------------------------------------------------------
@dataclass
class CVSettings:
    folds: int = 10
    predictive: str = "plugin"
    crps_method: str = "cdf"


@dataclass
class DerivedRequest:
    name: str
    profile: dict[str, str]
    quantities: tuple[str, ...] = ("mean", "sd", "gini")
    quantiles: tuple[float, ...] = ()
    level: float = 0.95


@dataclass
class Covariate:
    name: str
    dist: str
    args: tuple[float, ...] = ()


@dataclass
class SimulationScenario:
    """Data-generating family and predictor truths plus the candidate list.

    ``truth`` maps parameter names to predictor-scale expressions;
    ``smooth`` maps ``(param, term label)`` to the true term curve, centred
    before comparison.
    """

    family: str
    n: int = 1000
    replicates: int = 10
    candidates: tuple[str, ...] = ()
    covariates: list[Covariate] = field(default_factory=list)
    truth: dict[str, str] = field(default_factory=dict)
    smooth: dict[tuple[str, str], str] = field(default_factory=dict)
    level: float = 0.95
    regions: int = 0


@dataclass
class RunConfig:
    family: str
    params: dict[str, ParamSpec]
    data: str | None = None
    adjacency: str | None = None
    response: str = "y"
    categorical: tuple[str, ...] = ()
    task: str = "fit"
    seed: int = 0
    out: str = "out"
    workers: int = 1
    score_data: str | None = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    cv: CVSettings = field(default_factory=CVSettings)
    derived: list[DerivedRequest] = field(default_factory=list)
    simulation: SimulationScenario | None = None

    @property
    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.family, {k: dataclasses.replace(v, terms=list(v.terms))
                                       for k, v in self.params.items()})

    def sampler_config(self) -> SamplerConfig:
        return dataclasses.replace(self.sampler, seed=self.seed)


# ---------------------------------------------------------------------------
# lexing
# ---------------------------------------------------------------------------
@dataclass
class _Entry:
    section: str
    arg: str
    key: str
    value: str
    line: int


def _lex(text: str) -> list[_Entry]:
    entries, section, arg = [], "", ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if " #" in line:
            line = line.split(" #", 1)[0].rstrip()
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno)
            head = line[1:-1].split(None, 1)
            if not head:
                raise ConfigError("empty section header", line=lineno)
            section = head[0]
            arg = head[1].strip() if len(head) > 1 else ""
            if section not in ("sampler", "param", "cv", "derived", "simulation"):
                raise ConfigError(f"unknown section [{section}]", key=section, line=lineno)
            if section in ("param", "derived") and not arg:
                raise ConfigError(f"section [{section}] needs a name", key=section, line=lineno)
            entries.append(_Entry(section, arg, "", "", lineno))
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        entries.append(_Entry(section, arg, key, value, lineno))
    return entries


def _apply_overrides(entries: list[_Entry], overrides) -> list[_Entry]:
    """Overrides are ``key=value`` with key ``name``, ``section.name`` or ``section.arg.name``."""
    entries = list(entries)
    for ov in overrides or ():
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not key=value", key=ov)
        path, value = (s.strip() for s in ov.split("=", 1))
        parts = path.split(".")
        if len(parts) == 1:
            section, arg, key = "", "", parts[0]
        elif len(parts) == 2:
            section, arg, key = parts[0], "", parts[1]
        elif len(parts) == 3:
            section, arg, key = parts
        else:
            raise ConfigError(f"cannot interpret override path {path!r}", key=path)
        idx = [i for i, e in enumerate(entries)
               if e.section == section and e.arg == arg and e.key == key]
        if idx:
            first = entries[idx[0]]
            entries = [e for i, e in enumerate(entries) if i not in idx[1:]]
            entries[idx[0]] = _Entry(section, arg, key, value, first.line)
            continue
        if section and not any(e.section == section and e.arg == arg for e in entries):
            entries.append(_Entry(section, arg, "", "", 0))
        # insert after the last entry of the matching section (top-level: at the front)
        pos = 0
        for i, e in enumerate(entries):
            if e.section == section and e.arg == arg:
                pos = i + 1
        entries.insert(pos, _Entry(section, arg, key, value, 0))
    return entries


# ---------------------------------------------------------------------------
# value converters
# ---------------------------------------------------------------------------
def _int(e: _Entry) -> int:
    try:
        return int(e.value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {e.value!r}", e.key, e.line) from None


def _float(e: _Entry, value: str | None = None) -> float:
    v = e.value if value is None else value
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"expected a number, got {v!r}", e.key, e.line) from None


def _bool(e: _Entry, value: str | None = None) -> bool:
    v = (e.value if value is None else value).lower()
    if v in ("true", "yes", "1"):
        return True
    if v in ("false", "no", "0"):
        return False
    raise ConfigError(f"expected true/false, got {v!r}", e.key, e.line)


def _list(value: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in value.split(",") if s.strip())


def _term(e: _Entry):
    parts = e.value.split()
    if len(parts) < 2:
        raise ConfigError("term needs '<type> <column>'", e.key, e.line)
    kind, column, *opts = parts
    if kind not in TERM_TYPES:
        raise ConfigError(f"unknown term type {kind!r}; choose from {sorted(TERM_TYPES)}",
                          e.key, e.line)
    cls = TERM_TYPES[kind]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for opt in opts:
        if "=" not in opt:
            raise ConfigError(f"term option {opt!r} is not name=value", e.key, e.line)
        name, val = opt.split("=", 1)
        if name not in fields or name == "column":
            raise ConfigError(f"unknown option {name!r} for {kind} term", e.key, e.line)
        if name in ("degree", "knots", "order"):
            kwargs[name] = int(_float(e, val))
        elif name in ("a", "b"):
            kwargs[name] = _float(e, val)
        elif name in ("structured", "unstructured"):
            kwargs[name] = _bool(e, val)
        elif name == "covariates":
            kwargs[name] = tuple(c for c in val.split(";") if c)
        else:
            kwargs[name] = val
    try:
        return cls(column, **kwargs)
    except TypeError as exc:
        raise ConfigError(f"{kind} term: {exc}", e.key, e.line) from None


def _term_text(term) -> str:
    kind = {v: k for k, v in TERM_TYPES.items()}[type(term)]
    parts = [kind, term.column]
    for f in dataclasses.fields(term):
        if f.name == "column":
            continue
        v = getattr(term, f.name)
        if v == f.default:
            continue
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, tuple):
            v = ";".join(v)
        elif isinstance(v, float):
            v = repr(v)
        parts.append(f"{f.name}={v}")
    return " ".join(parts)


def _term_columns(term) -> list[str]:
    cols = [term.column]
    if hasattr(term, "by"):
        cols.append(term.by)
    if isinstance(term, Spatial):
        cols.extend(term.covariates)
    return cols


def _resolve(path: str, base: str | None) -> str:
    if base and not os.path.isabs(path):
        path = os.path.join(base, path)
    return os.path.abspath(path)


def _csv_header(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [h.strip() for h in fh.readline().strip().split(",")]


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------
def parse_config_text(text: str, base_dir: str | None = None, overrides=None,
                      check_files: bool = True) -> RunConfig:
    """Parse and validate config text; see the module docstring for the grammar."""
    entries = _apply_overrides(_lex(text), overrides)
    top: dict[str, _Entry] = {}
    sampler_kw: dict = {}
    params: dict[str, tuple[ParamSpec, list[tuple]]] = {}
    cv = CVSettings()
    derived: dict[str, tuple[DerivedRequest, int]] = {}
    sim_entries: list[_Entry] = []
    seen: set[tuple] = set()

    for e in entries:
        if not e.key:
            if e.section == "param" and e.arg not in params:
                params[e.arg] = (ParamSpec(terms=[]), [])
            if e.section == "derived" and e.arg not in derived:
                derived[e.arg] = (DerivedRequest(e.arg, {}), e.line)
            if e.section == "simulation":
                sim_entries.append(e)
            continue
        sig = (e.section, e.arg, e.key)
        if sig in seen and e.key not in _REPEATABLE:
            raise ConfigError("duplicate key", e.key, e.line)
        seen.add(sig)
        if e.section == "":
            if e.key not in _TOP_KEYS:
                raise ConfigError("unknown key", e.key, e.line)
            top[e.key] = e
        elif e.section == "sampler":
            if e.key not in _SAMPLER_KEYS:
                raise ConfigError("unknown sampler key", e.key, e.line)
            f = {f.name: f for f in dataclasses.fields(SamplerConfig)}[e.key]
            sampler_kw[e.key] = (e.value if f.type == "str" else
                                 _float(e) if f.type == "float" else _int(e))
        elif e.section == "param":
            if e.key not in _PARAM_KEYS:
                raise ConfigError("unknown key in [param]", e.key, e.line)
            ps, lines = params.setdefault(e.arg, (ParamSpec(terms=[]), []))
            if e.key == "intercept":
                ps.intercept = _bool(e)
            elif e.key == "offset":
                ps.offset = _float(e)
            else:
                ps.terms.append(_term(e))
                lines.append((ps.terms[-1], e))
        elif e.section == "cv":
            if e.key not in _CV_KEYS:
                raise ConfigError("unknown key in [cv]", e.key, e.line)
            if e.key == "folds":
                cv.folds = _int(e)
                if cv.folds < 2:
                    raise ConfigError("folds must be >= 2", e.key, e.line)
            elif e.key == "predictive":
                if e.value not in ("plugin", "mixture"):
                    raise ConfigError("predictive must be plugin or mixture", e.key, e.line)
                cv.predictive = e.value
            else:
                if e.value not in ("cdf", "quantile"):
                    raise ConfigError("crps_method must be cdf or quantile", e.key, e.line)
                cv.crps_method = e.value
        elif e.section == "derived":
            if e.key not in _DERIVED_KEYS:
                raise ConfigError("unknown key in [derived]", e.key, e.line)
            req, _ = derived.setdefault(e.arg, (DerivedRequest(e.arg, {}), e.line))
            if e.key == "profile":
                prof = {}
                for item in _list(e.value):
                    if "=" not in item:
                        raise ConfigError(f"profile entry {item!r} is not column=value",
                                          e.key, e.line)
                    c, v = (s.strip() for s in item.split("=", 1))
                    prof[c] = v
                req.profile = prof
            elif e.key == "quantities":
                q = _list(e.value)
                bad = set(q) - _QUANTITIES
                if bad:
                    raise ConfigError(f"unknown quantities {sorted(bad)}", e.key, e.line)
                req.quantities = q
            elif e.key == "quantiles":
                req.quantiles = tuple(_float(e, v) for v in _list(e.value))
                if any(not 0 < q < 1 for q in req.quantiles):
                    raise ConfigError("quantiles must lie in (0, 1)", e.key, e.line)
            else:
                req.level = _float(e)
        elif e.section == "simulation":
            sim_entries.append(e)

    if "family" not in top:
        raise ConfigError("missing required key", "family")
    fe = top["family"]
    family = fe.value
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}",
                          "family", fe.line)
    fam = FAMILIES[family]
    for name in params:
        if name not in fam.params:
            line = next(e.line for e in entries if e.section == "param" and e.arg == name)
            raise ConfigError(f"family {family} has no parameter {name!r} "
                              f"(parameters: {', '.join(fam.params)})", "param", line)
    param_specs = {name: params[name][0] if name in params else ParamSpec(terms=[])
                   for name in fam.params}

    task = top["task"].value if "task" in top else "fit"
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}", "task", top["task"].line)

    def path(key):
        if key not in top:
            return None
        p = _resolve(top[key].value, base_dir)
        if check_files and not os.path.exists(p):
            raise ConfigError(f"file not found: {p}", key, top[key].line)
        return p

    data = path("data")
    adjacency = path("adjacency")
    score_data = path("score_data")
    if data is None and task != "simulate":
        raise ConfigError(f"task {task!r} needs a data file", "data")

    kw = {}
    for key in ("seed", "workers"):
        if key in top:
            kw[key] = _int(top[key])
            if kw[key] < (1 if key == "workers" else 0):
                raise ConfigError(f"{key} out of range", key, top[key].line)
    try:
        sampler = SamplerConfig(**sampler_kw)
    except ValueError as exc:
        raise ConfigError(str(exc), "sampler") from None

    cfg = RunConfig(
        family=family,
        params=param_specs,
        data=data,
        adjacency=adjacency,
        response=top["response"].value if "response" in top else "y",
        categorical=_list(top["categorical"].value) if "categorical" in top else (),
        task=task,
        out=_resolve(top["out"].value, base_dir) if "out" in top else "out",
        score_data=score_data,
        sampler=sampler,
        cv=cv,
        derived=[r for r, _ in derived.values()],
        simulation=_parse_simulation(sim_entries, family) if sim_entries else None,
        **kw,
    )

    if data is not None and check_files:
        header = set(_csv_header(data))
        if cfg.response not in header:
            raise ConfigError(f"response column {cfg.response!r} not in {data}", "response",
                              top["response"].line if "response" in top else None)
        for c in cfg.categorical:
            if c not in header:
                raise ConfigError(f"categorical column {c!r} not in data", "categorical",
                                  top["categorical"].line)
        for _, (_, lines) in params.items():
            for term, e in lines:
                for c in _term_columns(term):
                    if c not in header:
                        raise ConfigError(f"unknown column {c!r}", e.key, e.line)
        for req, line in derived.values():
            for c in req.profile:
                if c not in header:
                    raise ConfigError(f"unknown profile column {c!r}", "profile", line)
    if cfg.simulation is not None:
        sim_names = {c.name for c in cfg.simulation.covariates}
        for _, (_, lines) in params.items():
            for term, e in lines:
                for c in _term_columns(term):
                    if data is None and c not in sim_names:
                        raise ConfigError(f"unknown column {c!r}", e.key, e.line)
    return cfg


def _parse_simulation(entries: list[_Entry], default_family: str) -> SimulationScenario:
    sc = SimulationScenario(default_family)
    header_line = entries[0].line if entries else None
    for e in entries:
        if not e.key:
            continue
        head = e.key.split()
        key = head[0]
        if key not in _SIM_KEYS:
            raise ConfigError("unknown key in [simulation]", e.key, e.line)
        if key == "family":
            if e.value not in FAMILIES:
                raise ConfigError(f"unknown family {e.value!r}", e.key, e.line)
            sc.family = e.value
        elif key in ("n", "replicates", "regions"):
            setattr(sc, key, _int(e))
        elif key == "level":
            sc.level = _float(e)
        elif key == "candidates":
            c = _list(e.value)
            bad = [f for f in c if f not in FAMILIES]
            if bad:
                raise ConfigError(f"unknown families {bad}", e.key, e.line)
            sc.candidates = c
        elif key == "covariate":
            if len(head) != 2:
                raise ConfigError("use 'covariate <name> = <dist> [args]'", e.key, e.line)
            spec = e.value.split()
            if not spec or spec[0] not in ("uniform", "normal", "binary", "region"):
                raise ConfigError("covariate distribution must be uniform, normal, binary "
                                  "or region", e.key, e.line)
            sc.covariates.append(Covariate(head[1], spec[0],
                                           tuple(_float(e, v) for v in spec[1:])))
        elif key == "truth":
            if len(head) != 2:
                raise ConfigError("use 'truth <param> = <expression>'", e.key, e.line)
            _check_expr(e)
            sc.truth[head[1]] = e.value
        elif key == "smooth":
            if len(head) != 3:
                raise ConfigError("use 'smooth <param> <term label> = <expression>'",
                                  e.key, e.line)
            _check_expr(e)
            sc.smooth[(head[1], head[2])] = e.value
    fam = FAMILIES[sc.family]
    names = {c.name for c in sc.covariates}
    for p, expr in sc.truth.items():
        if p not in fam.params:
            raise ConfigError(f"family {sc.family} has no parameter {p!r}", "truth", header_line)
        unknown = _expr_names(expr) - names
        if unknown:
            raise ConfigError(f"truth for {p!r} uses unknown covariates {sorted(unknown)}",
                              "truth", header_line)
    missing = [p for p in fam.params if p not in sc.truth]
    if missing:
        raise ConfigError(f"missing truth for parameters {missing}", "truth", header_line)
    if not sc.candidates:
        sc.candidates = (sc.family,)
    return sc


def _check_expr(e: _Entry):
    try:
        _expr_names(e.value)
    except SyntaxError:
        raise ConfigError(f"cannot parse expression {e.value!r}", e.key, e.line) from None


def parse_config(path, overrides=None, check_files: bool = True) -> RunConfig:
    """Read and validate a config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config_text(text, os.path.dirname(os.path.abspath(path)), overrides,
                             check_files)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------
def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def serialize_config(cfg: RunConfig) -> str:
    """Text that parses back to an equal :class:`RunConfig`."""
    out = [f"family = {cfg.family}"]
    for key in ("data", "adjacency", "score_data"):
        if getattr(cfg, key) is not None:
            out.append(f"{key} = {getattr(cfg, key)}")
    out.append(f"response = {cfg.response}")
    if cfg.categorical:
        out.append(f"categorical = {', '.join(cfg.categorical)}")
    out += [f"task = {cfg.task}", f"seed = {cfg.seed}", f"out = {cfg.out}",
            f"workers = {cfg.workers}", "", "[sampler]"]
    for f in dataclasses.fields(SamplerConfig):
        if f.name != "seed":
            out.append(f"{f.name} = {_fmt(getattr(cfg.sampler, f.name))}")
    for name, ps in cfg.params.items():
        out += ["", f"[param {name}]", f"intercept = {_fmt(ps.intercept)}",
                f"offset = {_fmt(float(ps.offset))}"]
        out += [f"term = {_term_text(t)}" for t in ps.terms]
    out += ["", "[cv]", f"folds = {cfg.cv.folds}", f"predictive = {cfg.cv.predictive}",
            f"crps_method = {cfg.cv.crps_method}"]
    for req in cfg.derived:
        out += ["", f"[derived {req.name}]"]
        if req.profile:
            out.append("profile = " + ", ".join(f"{k}={v}" for k, v in req.profile.items()))
        out.append(f"quantities = {', '.join(req.quantities)}")
        if req.quantiles:
            out.append("quantiles = " + ", ".join(repr(q) for q in req.quantiles))
        out.append(f"level = {_fmt(req.level)}")
    sc = cfg.simulation
    if sc is not None:
        out += ["", "[simulation]", f"family = {sc.family}", f"n = {sc.n}",
                f"replicates = {sc.replicates}", f"candidates = {', '.join(sc.candidates)}",
                f"level = {_fmt(sc.level)}", f"regions = {sc.regions}"]
        for c in sc.covariates:
            out.append(f"covariate {c.name} = {' '.join([c.dist, *map(repr, c.args)])}")
        for p, expr in sc.truth.items():
            out.append(f"truth {p} = {expr}")
        for (p, lab), expr in sc.smooth.items():
            out.append(f"smooth {p} {lab} = {expr}")
    return "\n".join(out) + "\n"
