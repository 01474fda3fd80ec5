"""Generalized consistent weighted sampling (GCWS).

For sample ``j`` and transformed coordinate ``i`` with weight ``w > 0``::

    t = floor(log(w) / r + beta)
    z = exp(r * (t - beta))
    a = c / (z * exp(r))

and the signature is ``(argmin_i a, t[argmin])``. ``r, c ~ Gamma(2, 1)`` and
``beta ~ Uniform[0, 1)`` must be the same for every hashed vector, so they are
drawn from a counter-based generator keyed by ``(seed, j, i)`` instead of a
materialized ``k x 2D`` table. Only nonzero coordinates take part: as
``w -> 0+``, ``a -> inf``.
"""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_seed, check_signed_matrix
from .dataio import SparseVector
from .transform import TransformedVector, l1_normalize, row_to_transformed, sign_split, transform

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53

# Variate streams per (seed, j, i).
_R1, _R2, _C1, _C2, _BETA = range(5)

# Upper bound on (samples x nnz) evaluated at once by sketch().
_CHUNK_ELEMS = 1 << 20


def _mix64(x):
    """SplitMix64 finalizer on a uint64 array (wrapping arithmetic)."""
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _keys(seed, j, i):
    with np.errstate(over="ignore"):
        s = _mix64(np.asarray([seed], dtype=np.uint64))
        hj = _mix64(s + np.asarray(j, dtype=np.uint64))
        return _mix64(hj[..., None] + np.asarray(i, dtype=np.uint64))


def _stream(keys, s):
    with np.errstate(over="ignore"):
        return _mix64(keys + np.uint64(s))


def _open01(bits):
    # 53 high bits mapped to the open interval (0, 1)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def _variate_arrays(seed, j, i):
    """Variates for every combination of sample indices ``j`` (rows) and coordinates ``i`` (cols)."""
    keys = _keys(seed, np.atleast_1d(j), np.atleast_1d(i))
    r = -np.log(_open01(_stream(keys, _R1))) - np.log(_open01(_stream(keys, _R2)))
    c = -np.log(_open01(_stream(keys, _C1))) - np.log(_open01(_stream(keys, _C2)))
    beta = (_stream(keys, _BETA) >> np.uint64(11)).astype(np.float64) * _TWO_M53
    return r, c, beta


def variates(seed, j, i):
    """The shared ``(r, c, beta)`` for master seed ``seed``, sample ``j`` and coordinate ``i``."""
    r, c, beta = _variate_arrays(check_seed(seed), j, i)
    return float(r[0, 0]), float(c[0, 0]), float(beta[0, 0])


@dataclass(frozen=True)
class GcwsConfig:
    k: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "k", check_positive_int(self.k, "k"))
        object.__setattr__(self, "seed", check_seed(self.seed))


class GcwsSignature(NamedTuple):
    i_star: int
    t_star: int


class CollisionMode(str, enum.Enum):
    FULL = "full"
    ZERO_BIT = "zerobit"


@dataclass(frozen=True, eq=False)
class GcwsSketch:
    dim2: int
    config: GcwsConfig
    i_star: np.ndarray
    t_star: np.ndarray

    @property
    def signatures(self):
        return [GcwsSignature(int(a), int(b)) for a, b in zip(self.i_star, self.t_star)]

    def __len__(self):
        return self.config.k

    def __eq__(self, other):
        if not isinstance(other, GcwsSketch):
            return NotImplemented
        return (
            self.dim2 == other.dim2
            and self.config == other.config
            and np.array_equal(self.i_star, other.i_star)
            and np.array_equal(self.t_star, other.t_star)
        )

    def dumps(self):
        """One line of ``i_star:t_star`` pairs."""
        return " ".join(f"{a}:{b}" for a, b in zip(self.i_star.tolist(), self.t_star.tolist()))


def _hash_samples(indices, weights, seed, js):
    """Signatures for sample indices ``js`` of one nonempty positive-weight vector."""
    r, c, beta = _variate_arrays(seed, js, indices)
    logw = np.log(weights)
    t = np.floor(logw / r + beta)
    # log of c / (exp(r (t - beta)) * exp(r))
    log_a = np.log(c) - r * (t - beta) - r
    arg = np.argmin(log_a, axis=1)
    rows = np.arange(arg.size)
    return indices[arg], t[rows, arg].astype(np.int64)


def _prepare(t, normalize):
    if isinstance(t, SparseVector):
        t = transform(t)
    if t.is_empty():
        raise ValueError("cannot hash an empty vector")
    if normalize and not t.l1_normalized:
        t = l1_normalize(t)
    return t


def hash_one(t: TransformedVector, config: GcwsConfig, j: int) -> GcwsSignature:
    """Signature for sample ``j``; ``t`` must be nonempty and L1-normalized."""
    if t.is_empty():
        raise ValueError("cannot hash an empty vector")
    i_star, t_star = _hash_samples(t.indices, t.values, config.seed, np.array([j]))
    return GcwsSignature(int(i_star[0]), int(t_star[0]))


def sketch(t, config: GcwsConfig, normalize=True) -> GcwsSketch:
    """All ``k`` signatures of one vector.

    ``t`` may be a :class:`TransformedVector` or a raw :class:`SparseVector`.
    With ``normalize=True`` (the NGMM setting) the input is L1-normalized first
    if it is not already; ``normalize=False`` hashes raw magnitudes (GMM).
    """
    t = _prepare(t, normalize)
    k = config.k
    step = max(1, _CHUNK_ELEMS // t.nnz)
    i_star = np.empty(k, dtype=np.int64)
    t_star = np.empty(k, dtype=np.int64)
    for j0 in range(0, k, step):
        js = np.arange(j0, min(j0 + step, k))
        i_star[j0:j0 + js.size], t_star[j0:j0 + js.size] = _hash_samples(
            t.indices, t.values, config.seed, js
        )
    return GcwsSketch(t.dim2, config, i_star, t_star)


def collision_rate(a: GcwsSketch, b: GcwsSketch, mode=CollisionMode.FULL) -> float:
    mode = CollisionMode(mode)
    if a.config != b.config or a.dim2 != b.dim2:
        raise ValueError("sketches were built with different configurations")
    match = a.i_star == b.i_star
    if mode is CollisionMode.FULL:
        match &= a.t_star == b.t_star
    return float(np.count_nonzero(match)) / a.config.k


class EmptyRowError(ValueError):
    """Rows that cannot be hashed because they are all zero."""

    def __init__(self, rows):
        self.rows = list(rows)
        shown = ", ".join(str(r) for r in self.rows[:10])
        more = " ..." if len(self.rows) > 10 else ""
        super().__init__(f"cannot hash zero vectors (rows {shown}{more})")


def sketch_matrix(X, config: GcwsConfig, normalize=True, n_jobs=1):
    """Sketch every row of ``X``; returns ``(i_star, t_star)`` arrays of shape ``(n, k)``.

    Rows are independent, so the output does not depend on ``n_jobs``.
    """
    T = sign_split(X)
    counts = np.diff(T.indptr)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyRowError(empty.tolist())
    n = T.shape[0]
    i_star = np.empty((n, config.k), dtype=np.int64)
    t_star = np.empty((n, config.k), dtype=np.int64)

    def run(r):
        s = sketch(row_to_transformed(T, r, False), config, normalize=normalize)
        i_star[r], t_star[r] = s.i_star, s.t_star

    if n_jobs is None or n_jobs == 1 or n <= 1:
        for r in range(n):
            run(r)
    else:
        workers = None if n_jobs < 0 else int(n_jobs)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(n)))
    return i_star, t_star


class GCWSHasher(TransformerMixin, BaseEstimator):
    """Hash signed rows into ``k`` GCWS signatures.

    ``transform`` returns the ``(n, k)`` array of ``i*`` values (the 0-bit
    representation); :meth:`sketches` returns full :class:`GcwsSketch` objects.

    Parameters
    ----------
    k : int, default=256
        Number of independent samples per row.
    seed : int, default=0
        Master seed; hashers with the same seed and k are consistent.
    normalize : bool, default=True
        L1-normalize the sign-split rows first (NGMM); ``False`` hashes GMM.
    n_jobs : int, default=1
    """

    def __init__(self, k=256, seed=0, normalize=True, n_jobs=1):
        self.k = k
        self.seed = seed
        self.normalize = normalize
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        X = check_signed_matrix(X)
        self.config_ = GcwsConfig(self.k, self.seed)
        self.n_features_in_ = X.shape[1]
        return self

    def _sketch(self, X):
        check_is_fitted(self, "config_")
        X = check_signed_matrix(X, n_features=self.n_features_in_)
        return sketch_matrix(X, self.config_, self.normalize, self.n_jobs)

    def transform(self, X):
        return self._sketch(X)[0]

    def sketches(self, X):
        i_star, t_star = self._sketch(X)
        dim2 = 2 * self.n_features_in_
        return [GcwsSketch(dim2, self.config_, a, b) for a, b in zip(i_star, t_star)]
