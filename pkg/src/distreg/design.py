"""Design matrices, penalties and identifiability constraints.

Every additive term is turned into one or more :class:`DesignBlock` objects.
A block stores a *raw* basis (dense columns or a level index) together with an
optional column transform ``T`` so that the design seen by the sampler is
``Z = R @ T``.  Cross products ``Z' W Z`` are formed in the raw space, where
B-spline and incidence bases are sparse, and projected afterwards.

Knot convention for P-splines
-----------------------------
``knots`` equidistant knots are placed on ``[min(x), max(x)]`` (both ends
included) and ``degree`` further knots with the same spacing are added on
each side.  The basis therefore has ``knots + degree - 1`` columns, e.g. 22
columns for the default cubic basis on twenty knots.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.interpolate import BSpline
from scipy.sparse.csgraph import connected_components

__all__ = [
    "Dataset",
    "AdjacencyMap",
    "DesignBlock",
    "Linear",
    "PSpline",
    "VaryingCoefficient",
    "RandomEffect",
    "MRF",
    "Spatial",
    "ParamSpec",
    "ModelSpec",
    "Predictor",
    "DesignError",
    "ExtrapolationError",
    "bspline_knots",
    "build_difference_penalty",
    "build_bspline_block",
    "build_random_effect_block",
    "build_mrf_block",
    "build_varying_coefficient",
    "center_block",
    "assemble_predictors",
    "numerical_rank",
]

DEFAULT_A = 0.001
DEFAULT_B = 0.001


class DesignError(ValueError):
    """Invalid data or term definition."""


class ExtrapolationError(DesignError):
    """Covariate values outside the range a basis was built on."""


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------
class Dataset:
    """Named, equal-length columns; categorical columns hold strings."""

    def __init__(self, columns: Mapping[str, Iterable], categorical: Iterable[str] = ()):
        categorical = set(categorical)
        self.columns: dict[str, np.ndarray] = {}
        self.categorical: set[str] = set()
        n = None
        for name, values in columns.items():
            if name in categorical:
                arr = np.asarray([str(v) for v in values], dtype=object)
                self.categorical.add(name)
            else:
                arr = np.asarray(values, dtype=float)
                if arr.ndim != 1:
                    raise DesignError(f"column {name!r} must be one-dimensional")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise DesignError(
                    f"column {name!r} has length {arr.shape[0]}, expected {n}")
            self.columns[name] = arr
        missing = categorical - set(self.columns)
        if missing:
            raise DesignError(f"categorical columns not present: {sorted(missing)}")
        self.n = 0 if n is None else n

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self.columns[name]
        except KeyError:
            raise DesignError(f"unknown column {name!r}") from None

    def __contains__(self, name):
        return name in self.columns

    def __len__(self):
        return self.n

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def numeric(self, name: str) -> np.ndarray:
        col = self[name]
        if name in self.categorical:
            raise DesignError(f"column {name!r} is categorical, expected numeric")
        if not np.all(np.isfinite(col)):
            raise DesignError(f"column {name!r} contains non-finite values")
        return col

    def subset(self, index) -> "Dataset":
        return Dataset({k: v[index] for k, v in self.columns.items()},
                       categorical=self.categorical)

    @classmethod
    def from_csv(cls, path, categorical: Iterable[str] = ()) -> "Dataset":
        categorical = set(categorical)
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise DesignError(f"{path}: empty file, header row required") from None
            rows = [r for r in reader if r]
        cols: dict[str, list] = {h: [] for h in header}
        for lineno, row in enumerate(rows, start=2):
            if len(row) != len(header):
                raise DesignError(f"{path}:{lineno}: expected {len(header)} fields")
            for h, v in zip(header, row):
                v = v.strip()
                if h in categorical:
                    cols[h].append(v)
                else:
                    try:
                        cols[h].append(float(v))
                    except ValueError:
                        raise DesignError(
                            f"{path}:{lineno}: column {h!r} value {v!r} is not numeric"
                        ) from None
        return cls(cols, categorical=categorical & set(header))

    def to_csv(self, path):
        names = self.names
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for i in range(self.n):
                w.writerow([self.columns[c][i] if c in self.categorical
                            else repr(float(self.columns[c][i])) for c in names])


@dataclass
class AdjacencyMap:
    """Neighbourhood structure of a set of regions."""

    regions: list[str]
    neighbors: dict[str, set[str]]

    def __post_init__(self):
        self.regions = [str(r) for r in self.regions]
        if len(set(self.regions)) != len(self.regions):
            raise DesignError("duplicate region labels in adjacency map")
        known = set(self.regions)
        nb = {str(k): {str(x) for x in v} for k, v in self.neighbors.items()}
        for r in self.regions:
            nb.setdefault(r, set())
        for r, ns in nb.items():
            if r not in known:
                raise DesignError(f"adjacency lists unknown region {r!r}")
            if r in ns:
                raise DesignError(f"region {r!r} lists itself as a neighbour")
            for s in ns:
                if s not in known:
                    raise DesignError(f"region {r!r} has unknown neighbour {s!r}")
                if r not in nb[s]:
                    raise DesignError(
                        f"asymmetric adjacency: {s!r} is a neighbour of {r!r} but not vice versa")
        self.neighbors = nb
        self.index = {r: i for i, r in enumerate(self.regions)}

    @property
    def size(self) -> int:
        return len(self.regions)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(self.neighbors[r]) for r in self.regions], dtype=float)

    @property
    def islands(self) -> list[str]:
        return [r for r in self.regions if not self.neighbors[r]]

    def adjacency_matrix(self) -> sparse.csr_matrix:
        rows, cols = [], []
        for r in self.regions:
            for s in self.neighbors[r]:
                rows.append(self.index[r])
                cols.append(self.index[s])
        S = self.size
        return sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(S, S))

    def n_components(self) -> int:
        return connected_components(self.adjacency_matrix(), directed=False)[0]

    def laplacian(self) -> np.ndarray:
        A = self.adjacency_matrix().toarray()
        return np.diag(A.sum(axis=1)) - A

    @classmethod
    def from_file(cls, path) -> "AdjacencyMap":
        regions, nb = [], {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if ":" not in line:
                    raise DesignError(f"{path}:{lineno}: expected 'label: n1,n2,...'")
                label, rest = line.split(":", 1)
                label = label.strip()
                if label in nb:
                    raise DesignError(f"{path}:{lineno}: region {label!r} listed twice")
                regions.append(label)
                nb[label] = {s.strip() for s in rest.split(",") if s.strip()}
        return cls(regions, nb)

    def to_file(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for r in self.regions:
                fh.write(f"{r}: {','.join(sorted(self.neighbors[r]))}\n")


# ---------------------------------------------------------------------------
# raw bases
# ---------------------------------------------------------------------------
class _DenseBasis:
    """Dense raw columns with precomputed products of overlapping columns."""

    def __init__(self, R: np.ndarray):
        self.R = np.ascontiguousarray(R, dtype=float)
        nz = self.R != 0
        overlap = (nz.T.astype(float) @ nz.astype(float)) > 0
        iu, ju = np.nonzero(np.triu(overlap))
        self._pairs = (iu, ju)
        self._prod = np.ascontiguousarray((self.R[:, iu] * self.R[:, ju]).T)

    @property
    def ncols(self):
        return self.R.shape[1]

    def matvec(self, beta):
        return self.R @ beta

    def rmatvec(self, v):
        return self.R.T @ v

    def gram(self, w):
        vals = self._prod @ w
        iu, ju = self._pairs
        G = np.zeros((self.ncols, self.ncols))
        G[iu, ju] = vals
        G[ju, iu] = vals
        return G

    def dense(self):
        return self.R


class _IndexBasis:
    """0/1 incidence matrix stored as a column index per observation."""

    def __init__(self, idx: np.ndarray, ncols: int):
        self.idx = np.asarray(idx, dtype=np.intp)
        self._ncols = ncols

    @property
    def ncols(self):
        return self._ncols

    def matvec(self, beta):
        return beta[self.idx]

    def rmatvec(self, v):
        return np.bincount(self.idx, weights=v, minlength=self._ncols)

    def gram(self, w):
        return np.diag(np.bincount(self.idx, weights=w, minlength=self._ncols))

    def gram_diag(self, w):
        return np.bincount(self.idx, weights=w, minlength=self._ncols)

    def dense(self):
        Z = np.zeros((self.idx.size, self._ncols))
        Z[np.arange(self.idx.size), self.idx] = 1.0
        return Z


# ---------------------------------------------------------------------------
# design blocks
# ---------------------------------------------------------------------------
@dataclass
class DesignBlock:
    """One additive term: ``f = Z @ beta`` with prior precision ``K / tau2``.

    ``K is None`` marks a flat prior (linear effects); such blocks carry no
    smoothing variance.
    """

    label: str
    kind: str
    basis: object
    K: np.ndarray | None
    rank: int
    transform: np.ndarray | None = None
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    meta: dict = field(default_factory=dict)

    @property
    def n_coef(self) -> int:
        return self.basis.ncols if self.transform is None else self.transform.shape[1]

    @property
    def penalized(self) -> bool:
        return self.K is not None

    @property
    def Z(self) -> np.ndarray:
        R = self.basis.dense()
        return R if self.transform is None else R @ self.transform

    def raw_coef(self, beta):
        beta = np.asarray(beta, dtype=float)
        return beta if self.transform is None else beta @ self.transform.T

    def matvec(self, beta):
        if self.transform is not None:
            beta = self.transform @ beta
        return self.basis.matvec(beta)

    def rmatvec(self, v):
        out = self.basis.rmatvec(v)
        return out if self.transform is None else self.transform.T @ out

    def gram(self, w):
        G = self.basis.gram(w)
        if self.transform is None:
            return G
        T = self.transform
        return T.T @ G @ T

    def prior_quadratic(self, beta) -> float:
        if self.K is None:
            return 0.0
        return float(beta @ self.K @ beta)

    # -- evaluation at new data -------------------------------------------
    def design(self, data: Dataset, extrapolate: bool = False) -> np.ndarray:
        """Dense design matrix of this block for (possibly new) data."""
        R = _raw_design(self, data, extrapolate)
        return R if self.transform is None else R @ self.transform

    def in_range(self, data: Dataset) -> np.ndarray:
        """Rows of ``data`` the block can evaluate without extrapolation."""
        ok = np.ones(data.n, dtype=bool)
        if self.kind in ("pspline", "vc"):
            x = data[self.meta["column"]]
            lo, hi = self.meta["range"]
            ok &= (x >= lo) & (x <= hi)
        if self.kind == "mrf":
            known = self.meta["index"]
            ok &= np.array([r in known for r in data[self.meta["column"]]], dtype=bool)
        return ok


def _raw_design(block: DesignBlock, data: Dataset, extrapolate: bool) -> np.ndarray:
    meta = block.meta
    kind = block.kind
    if kind == "intercept":
        return np.ones((data.n, 1))
    if kind == "linear":
        return data.numeric(meta["column"])[:, None].copy()
    if kind in ("pspline", "vc"):
        x = data.numeric(meta["column"])
        R = _bspline_matrix(x, meta["knots"], meta["degree"], meta["range"], extrapolate)
        if kind == "vc":
            R = data.numeric(meta["by"])[:, None] * R
        return R
    if kind in ("random", "mrf"):
        index = meta["index"]
        labels = data[meta["column"]]
        R = np.zeros((data.n, len(index)))
        for i, lab in enumerate(labels):
            j = index.get(str(lab))
            if j is None:
                if kind == "mrf":
                    raise DesignError(f"region {lab!r} is not in the adjacency map")
                continue  # unseen level: prior mean zero
            R[i, j] = 1.0
        return R
    raise DesignError(f"unknown block kind {kind!r}")


# ---------------------------------------------------------------------------
# basis and penalty builders
# ---------------------------------------------------------------------------
def bspline_knots(lo: float, hi: float, knots: int, degree: int) -> np.ndarray:
    """Full knot vector: ``knots`` points on [lo, hi] plus ``degree`` on each side."""
    h = (hi - lo) / (knots - 1)
    return lo + h * np.arange(-degree, knots + degree)


def _bspline_matrix(x, t, degree, rng, extrapolate):
    lo, hi = rng
    outside = (x < lo) | (x > hi)
    if np.any(outside) and not extrapolate:
        bad = x[outside]
        raise ExtrapolationError(
            f"{bad.size} value(s) outside the basis range [{lo:g}, {hi:g}], e.g. {bad[0]:g}")
    if np.any(outside):
        return BSpline.design_matrix(x, t, degree, extrapolate=True).toarray()
    # clip guards the upper end against rounding in the knot grid
    xc = np.clip(x, t[degree], t[-degree - 1])
    return BSpline.design_matrix(xc, t, degree).toarray()


def build_difference_penalty(n_coef: int, order: int) -> np.ndarray:
    """Random-walk penalty ``D'D`` for the difference matrix of given order."""
    if order < 1 or order >= n_coef:
        raise DesignError(f"penalty order must satisfy 1 <= order < {n_coef}, got {order}")
    D = np.diff(np.eye(n_coef), n=order, axis=0)
    return D.T @ D


def numerical_rank(K: np.ndarray, rtol: float = 1e-10) -> int:
    s = np.linalg.svd(np.asarray(K, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def center_block(block: DesignBlock, tol: float = 1e-10) -> DesignBlock:
    """Reparameterize so the block's fitted values sum to zero over the data.

    The constraint ``1' Z beta = 0`` is removed by a QR-based transform to
    ``n_coef - 1`` free coefficients.  Blocks already satisfying it are
    returned unchanged, so repeated application is a no-op.
    """
    ones = np.ones(_n_rows(block.basis))
    c = block.rmatvec(ones)
    scale = max(1.0, float(np.abs(block.basis.rmatvec(ones)).max()))
    if np.abs(c).max() <= tol * scale:
        return block
    D = c.size
    if D < 2:
        raise DesignError(f"term {block.label!r}: centering constraint leaves no columns")
    Q, _ = np.linalg.qr(c[:, None], mode="complete")
    Q2 = Q[:, 1:]
    T = Q2 if block.transform is None else block.transform @ Q2
    K = None if block.K is None else Q2.T @ block.K @ Q2
    K = None if K is None else 0.5 * (K + K.T)
    meta = dict(block.meta, centered=True)
    return DesignBlock(block.label, block.kind, block.basis, K, block.rank, T,
                       block.a, block.b, meta)


def _n_rows(basis):
    return basis.idx.size if isinstance(basis, _IndexBasis) else basis.R.shape[0]


def build_bspline_block(x, degree: int = 3, inner_knots: int = 20, penalty_order: int = 2,
                        label: str = "f", a: float = DEFAULT_A, b: float = DEFAULT_B,
                        column: str | None = None, center: bool = False) -> DesignBlock:
    """P-spline block: B-spline basis with a difference penalty.

    The returned block is unconstrained unless ``center`` is set.
    """
    x = np.asarray(x, dtype=float)
    if degree < 0:
        raise DesignError("degree must be >= 0")
    if inner_knots < penalty_order + 1 or inner_knots < 2:
        raise DesignError(
            f"inner_knots must be >= penalty_order + 1 ({penalty_order + 1}), got {inner_knots}")
    if not np.all(np.isfinite(x)):
        raise DesignError(f"term {label!r}: covariate contains non-finite values")
    lo, hi = float(x.min()), float(x.max())
    if np.unique(x).size < 2 or hi <= lo:
        raise DesignError(f"term {label!r}: degenerate covariate (constant column)")
    t = bspline_knots(lo, hi, inner_knots, degree)
    R = _bspline_matrix(x, t, degree, (lo, hi), False)
    n_coef = R.shape[1]
    K = build_difference_penalty(n_coef, penalty_order)
    meta = dict(column=column, knots=t, degree=degree, range=(lo, hi),
                order=penalty_order)
    block = DesignBlock(label, "pspline", _DenseBasis(R), K, n_coef - penalty_order,
                        None, a, b, meta)
    return center_block(block) if center else block


def build_random_effect_block(g, label: str = "re", levels: Sequence[str] | None = None,
                              a: float = DEFAULT_A, b: float = DEFAULT_B,
                              column: str | None = None) -> DesignBlock:
    """i.i.d. Gaussian random effect for a grouping variable."""
    g = np.asarray([str(v) for v in g], dtype=object)
    if levels is None:
        levels = sorted(set(g))
    levels = [str(v) for v in levels]
    if len(levels) < 2:
        raise DesignError(f"term {label!r}: grouping variable needs at least two levels")
    index = {lev: i for i, lev in enumerate(levels)}
    try:
        idx = np.array([index[v] for v in g], dtype=np.intp)
    except KeyError as err:
        raise DesignError(f"term {label!r}: level {err.args[0]!r} not among levels") from None
    G = len(levels)
    meta = dict(column=column, levels=levels, index=index)
    return DesignBlock(label, "random", _IndexBasis(idx, G), np.eye(G), G, None, a, b, meta)


def build_mrf_block(s, adj: AdjacencyMap, label: str = "mrf", a: float = DEFAULT_A,
                    b: float = DEFAULT_B, column: str | None = None,
                    center: bool = False) -> DesignBlock:
    """Markov random field block with the graph Laplacian as penalty."""
    s = [str(v) for v in s]
    idx = np.empty(len(s), dtype=np.intp)
    for i, lab in enumerate(s):
        j = adj.index.get(lab)
        if j is None:
            raise DesignError(f"term {label!r}: region {lab!r} is not in the adjacency map")
        idx[i] = j
    K = adj.laplacian()
    rank = adj.size - adj.n_components()
    counts = np.bincount(idx, minlength=adj.size)
    orphans = [r for r in adj.islands if counts[adj.index[r]] == 0]
    if orphans:
        raise DesignError(
            f"term {label!r}: island region(s) without observations cannot be identified: "
            f"{orphans[:5]}")
    meta = dict(column=column, index=dict(adj.index), levels=list(adj.regions))
    block = DesignBlock(label, "mrf", _IndexBasis(idx, adj.size), K, rank, None, a, b, meta)
    return center_block(block) if center else block


def build_varying_coefficient(base: DesignBlock, z, label: str | None = None,
                              by: str | None = None) -> DesignBlock:
    """Smooth ``base`` multiplied row-wise by the interaction variable ``z``.

    The penalty and any centering transform of ``base`` are reused unchanged.
    """
    z = np.asarray(z, dtype=float)
    R = base.basis.dense()
    if z.shape != (R.shape[0],):
        raise DesignError(
            f"interaction variable has length {z.size}, base block has {R.shape[0]} rows")
    if not np.all(np.isfinite(z)):
        raise DesignError("interaction variable contains non-finite values")
    meta = dict(base.meta, by=by)
    kind = "vc" if base.kind == "pspline" else base.kind
    return DesignBlock(label or f"{base.label}:vc", kind, _DenseBasis(z[:, None] * R),
                       base.K, base.rank, base.transform, base.a, base.b, meta)


def _intercept_block(n: int) -> DesignBlock:
    return DesignBlock("(Intercept)", "intercept", _DenseBasis(np.ones((n, 1))), None, 0,
                       meta={})


def _linear_block(x, label, column) -> DesignBlock:
    x = np.asarray(x, dtype=float)
    return DesignBlock(label, "linear", _DenseBasis(x[:, None]), None, 0,
                       meta=dict(column=column))


# ---------------------------------------------------------------------------
# term definitions
# ---------------------------------------------------------------------------
@dataclass
class Linear:
    column: str
    label: str | None = None
    kind = "linear"

    def build(self, data: Dataset, adj=None) -> list[DesignBlock]:
        return [_linear_block(data.numeric(self.column), self.label or self.column,
                              self.column)]


@dataclass
class PSpline:
    column: str
    degree: int = 3
    knots: int = 20
    order: int = 2
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    label: str | None = None
    kind = "pspline"

    def build(self, data: Dataset, adj=None) -> list[DesignBlock]:
        label = self.label or f"f({self.column})"
        return [build_bspline_block(data.numeric(self.column), self.degree, self.knots,
                                    self.order, label, self.a, self.b, self.column,
                                    center=True)]


@dataclass
class VaryingCoefficient:
    column: str
    by: str
    degree: int = 3
    knots: int = 20
    order: int = 2
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    label: str | None = None
    kind = "vc"

    def build(self, data: Dataset, adj=None) -> list[DesignBlock]:
        label = self.label or f"{self.by}*f({self.column})"
        base = build_bspline_block(data.numeric(self.column), self.degree, self.knots,
                                   self.order, label, self.a, self.b, self.column,
                                   center=True)
        return [build_varying_coefficient(base, data.numeric(self.by), label, self.by)]


@dataclass
class RandomEffect:
    column: str
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    label: str | None = None
    kind = "random"

    def build(self, data: Dataset, adj=None) -> list[DesignBlock]:
        return [build_random_effect_block(data[self.column], self.label or f"re({self.column})",
                                          None, self.a, self.b, self.column)]


@dataclass
class MRF:
    column: str
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    label: str | None = None
    kind = "mrf"

    def build(self, data: Dataset, adj: AdjacencyMap | None = None) -> list[DesignBlock]:
        if adj is None:
            raise DesignError(f"MRF term on {self.column!r} needs an adjacency map")
        return [build_mrf_block(data[self.column], adj, self.label or f"mrf({self.column})",
                                self.a, self.b, self.column, center=True)]


@dataclass
class Spatial:
    """Region effect decomposed into region-level covariates plus structured
    (MRF) and unstructured (i.i.d.) region effects, in reduced form."""

    column: str
    covariates: tuple[str, ...] = ()
    structured: bool = True
    unstructured: bool = True
    a: float = DEFAULT_A
    b: float = DEFAULT_B
    label: str | None = None
    kind = "spatial"

    def build(self, data: Dataset, adj: AdjacencyMap | None = None) -> list[DesignBlock]:
        label = self.label or f"spat({self.column})"
        regions = data[self.column]
        blocks = []
        for cov in self.covariates:
            x = data.numeric(cov)
            _check_region_level(regions, x, cov)
            blocks.append(_linear_block(x, f"{label}:{cov}", cov))
        if self.structured:
            if adj is None:
                raise DesignError(f"structured spatial term {label!r} needs an adjacency map")
            blocks.append(build_mrf_block(regions, adj, f"{label}:str", self.a, self.b,
                                          self.column, center=True))
        if self.unstructured:
            levels = adj.regions if adj is not None else None
            blocks.append(build_random_effect_block(regions, f"{label}:unstr", levels,
                                                    self.a, self.b, self.column))
        if not blocks:
            raise DesignError(f"spatial term {label!r} has no components")
        return blocks


def _check_region_level(regions, x, name):
    seen: dict[str, float] = {}
    for r, v in zip(regions, x):
        if seen.setdefault(r, v) != v:
            raise DesignError(f"region-level covariate {name!r} varies within region {r!r}")


TERM_TYPES = {
    "linear": Linear,
    "pspline": PSpline,
    "vc": VaryingCoefficient,
    "random": RandomEffect,
    "mrf": MRF,
    "spatial": Spatial,
}


@dataclass
class ParamSpec:
    """Predictor of one distribution parameter.

    ``offset`` is added to the predictor; a parameter with neither intercept
    nor terms is held fixed at ``offset`` on the predictor scale.
    """

    terms: list = field(default_factory=list)
    intercept: bool = True
    offset: float = 0.0


@dataclass
class ModelSpec:
    family: str
    params: dict[str, ParamSpec]

    def validate(self, family=None):
        from .families import get_family

        fam = get_family(family or self.family)
        unknown = set(self.params) - set(fam.params)
        if unknown:
            raise DesignError(f"{fam.name} has no parameter(s) {sorted(unknown)}")
        for name in fam.params:
            self.params.setdefault(name, ParamSpec())
        return fam


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------
@dataclass
class Predictor:
    """Blocks of one distribution parameter; ``eta = offset + sum_j Z_j beta_j``."""

    name: str
    blocks: list[DesignBlock]
    offset: float = 0.0

    def eta(self, coefs: Sequence[np.ndarray]) -> np.ndarray:
        out = None
        for blk, beta in zip(self.blocks, coefs):
            f = blk.matvec(beta)
            out = f if out is None else out + f
        return out + self.offset

    def eta_new(self, data: Dataset, coefs, extrapolate: bool = False) -> np.ndarray:
        out = np.full(data.n, self.offset, dtype=float)
        for blk, beta in zip(self.blocks, coefs):
            out += blk.design(data, extrapolate) @ beta
        return out

    def flat_rank_audit(self):
        flat = [b for b in self.blocks if not b.penalized]
        if not flat:
            return
        X = np.hstack([b.Z for b in flat])
        if numerical_rank(X.T @ X) < X.shape[1]:
            labels = [b.label for b in flat]
            raise DesignError(
                f"parameter {self.name!r}: flat-prior design columns {labels} are rank deficient")


def assemble_predictors(spec: ModelSpec, data: Dataset,
                        adj: AdjacencyMap | None = None) -> dict[str, Predictor]:
    """Build the design blocks of every distribution parameter.

    Per parameter the order is: intercept, then each term in order, with
    spatial terms expanded into ``covariates..., str, unstr``.
    """
    fam = spec.validate()
    out = {}
    for name in fam.params:
        ps = spec.params[name]
        blocks = [_intercept_block(data.n)] if ps.intercept else []
        for term in ps.terms:
            blocks.extend(term.build(data, adj))
        labels = [b.label for b in blocks]
        dup = {lab for lab in labels if labels.count(lab) > 1}
        if dup:
            raise DesignError(f"parameter {name!r}: duplicate term labels {sorted(dup)}")
        for b in blocks:
            if b.n_coef == 0:
                raise DesignError(f"parameter {name!r}: term {b.label!r} has no columns")
        pred = Predictor(name, blocks, float(ps.offset))
        pred.flat_rank_audit()
        out[name] = pred
    return out
