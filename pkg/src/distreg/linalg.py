"""Cholesky-based solves and Gaussian sampling in precision parameterization."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.linalg import lapack
from scipy.sparse.csgraph import reverse_cuthill_mckee

__all__ = [
    "NotPositiveDefiniteError",
    "CholeskyFactor",
    "cholesky",
    "cholesky_jitter",
    "fill_reducing_order",
    "solve",
    "sample_mvn_precision",
    "mvn_logdensity",
    "PIVOT_RTOL",
    "JITTER",
]

#: pivots below this fraction of the largest diagonal entry count as failures
PIVOT_RTOL = 1e-12
#: ridge added (relative to the largest diagonal entry) on the single retry
JITTER = 1e-8

_LOG_2PI = np.log(2.0 * np.pi)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix not positive definite: pivot {pivot} has value {value:.3g}")
        self.pivot = pivot
        self.value = value


@dataclass(frozen=True)
class CholeskyFactor:
    """``P[perm][:, perm] = L @ L.T`` with ``L`` lower triangular."""

    L: np.ndarray
    perm: np.ndarray | None = None
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def _to_perm(self, v):
        return v if self.perm is None else v[self.perm]

    def _from_perm(self, v):
        if self.perm is None:
            return v
        out = np.empty_like(v)
        out[self.perm] = v
        return out

    def solve(self, b):
        x, info = lapack.dpotrs(self.L, self._to_perm(np.asarray(b, dtype=float)), lower=1)
        return self._from_perm(x)

    def solve_Lt(self, z):
        """``L'^{-1} z`` mapped back to the original ordering."""
        x, info = lapack.dtrtrs(self.L, np.asarray(z, dtype=float), lower=1, trans=1)
        return self._from_perm(x)

    def quad(self, r) -> float:
        """``r' P r``."""
        u = self.L.T @ self._to_perm(np.asarray(r, dtype=float))
        return float(u @ u)


def fill_reducing_order(P) -> np.ndarray:
    """Reverse Cuthill-McKee ordering of the sparsity pattern of ``P``."""
    S = sparse.csr_matrix(np.asarray(P) if not sparse.issparse(P) else P)
    return np.asarray(reverse_cuthill_mckee(S, symmetric_mode=True), dtype=np.intp)


def cholesky(P, perm=None) -> CholeskyFactor:
    """Lower Cholesky factor, optionally of the symmetrically permuted matrix.

    Raises :class:`NotPositiveDefiniteError` carrying the index (in the
    factorization order) of the first pivot that is non-positive or smaller
    than ``PIVOT_RTOL`` times the largest diagonal entry.
    """
    A = P.toarray() if sparse.issparse(P) else np.array(P, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("precision matrix must be square")
    if perm is not None:
        perm = np.asarray(perm, dtype=np.intp)
        A = A[np.ix_(perm, perm)]
    if not np.all(np.isfinite(A)):
        raise NotPositiveDefiniteError(0, float("nan"))
    L, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefiniteError(info - 1, float(A[info - 1, info - 1]))
    if info < 0:
        raise ValueError("invalid argument passed to dpotrf")
    d2 = np.diag(L) ** 2
    bad = np.flatnonzero(d2 < PIVOT_RTOL * np.max(np.diag(A)))
    if bad.size:
        raise NotPositiveDefiniteError(int(bad[0]), float(d2[bad[0]]))
    return CholeskyFactor(L, perm)


def cholesky_jitter(P, perm=None) -> CholeskyFactor:
    """Factor ``P``; on failure retry once with a small ridge added."""
    try:
        return cholesky(P, perm)
    except NotPositiveDefiniteError:
        A = P.toarray() if sparse.issparse(P) else np.asarray(P, dtype=float)
        ridge = JITTER * float(np.max(np.abs(np.diag(A))))
        f = cholesky(A + ridge * np.eye(A.shape[0]), perm)
        return CholeskyFactor(f.L, f.perm, ridge)


def _factor(P):
    return P if isinstance(P, CholeskyFactor) else cholesky(P)


def solve(P, b):
    return _factor(P).solve(b)


def sample_mvn_precision(mean, P, rng: np.random.Generator | None = None, z=None):
    """Draw from ``N(mean, P^{-1})`` as ``mean + L'^{-1} z``.

    ``P`` may be a matrix or a :class:`CholeskyFactor`.  Passing ``z``
    bypasses the generator (``z = 0`` returns ``mean``).
    """
    f = _factor(P)
    mean = np.asarray(mean, dtype=float)
    if z is None:
        z = rng.standard_normal(f.dim)
    return mean + f.solve_Lt(z)


def mvn_logdensity(x, mean, P) -> float:
    """Log-density of ``N(mean, P^{-1})`` at ``x``."""
    f = _factor(P)
    r = np.asarray(x, dtype=float) - np.asarray(mean, dtype=float)
    return 0.5 * f.logdet - 0.5 * f.dim * _LOG_2PI - 0.5 * f.quad(r)
