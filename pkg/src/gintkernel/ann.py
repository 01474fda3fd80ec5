"""Approximate near-neighbor search on banded b-bit GCWS values.

Table ``l`` keys each vector by the low ``b`` bits of its signatures
``l*m .. (l+1)*m - 1``. A query collects every vector that shares a bucket
with it in any table and re-ranks those candidates exactly.

Candidates are ordered by GInt (the intersection mass of the normalized
sign-split vectors), largest first, ties to the smaller id; the reported
score is NGMM = GInt / (2 - GInt). Because that map is increasing, the
order is both the GInt and the NGMM order.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive_int, check_signed_matrix
from .encode import check_bits, low_bits
from .dataio import SparseVector
from .gcws import EmptyRowError, GcwsConfig, sketch_matrix
from .kernels import KernelDomainError, KernelKind, KernelSpec, _pairwise

_GINT = KernelSpec(KernelKind.GINT)


def _single_query(q, n_features):
    if isinstance(q, SparseVector):
        q = [q]
    elif isinstance(q, (list, tuple, np.ndarray)) and np.ndim(q) == 1:
        q = np.asarray(q, dtype=float).reshape(1, -1)
    Q = check_signed_matrix(q, n_features=n_features)
    if Q.shape[0] != 1:
        raise ValueError("expected a single query vector")
    if Q.nnz == 0:
        raise ValueError("cannot query with a zero vector")
    return Q


@dataclass(eq=False)
class AnnIndex:
    tables: list
    band_size: int
    b: int
    config: GcwsConfig
    store: object  # CSR matrix of the indexed (signed) vectors

    @property
    def n_tables(self):
        return len(self.tables)

    def __len__(self):
        return self.store.shape[0]

    def _table_keys(self, i_star, n_tables=None):
        L = self.n_tables if n_tables is None else n_tables
        m = self.band_size
        bits = low_bits(i_star[:, : L * m], self.b).astype(np.int32)
        return [[bits[r, t * m:(t + 1) * m].tobytes() for r in range(bits.shape[0])]
                for t in range(L)]

    def candidates(self, q):
        """Ids sharing at least one bucket with ``q`` (sorted)."""
        i_star, _ = sketch_matrix(_single_query(q, self.store.shape[1]), self.config)
        keys = self._table_keys(i_star)
        found = [self.tables[t].get(keys[t][0]) for t in range(self.n_tables)]
        found = [f for f in found if f is not None]
        if not found:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate(found))

    def query(self, q, top):
        """Up to ``top`` ``(id, ngmm)`` pairs, best first."""
        top = check_positive_int(top, "top")
        cand = self.candidates(q)
        if cand.size == 0:
            return []
        Q = _single_query(q, self.store.shape[1])
        g = _pairwise(_GINT, Q, self.store[cand])[0]
        order = np.lexsort((cand, -g))[:top]
        return [(int(cand[o]), float(g[o] / (2.0 - g[o]))) for o in order]

    def bucket_histogram(self):
        """Per table, a ``{bucket size: number of buckets}`` mapping."""
        return [dict(sorted(Counter(len(ids) for ids in table.values()).items()))
                for table in self.tables]

    def dumps_stats(self):
        lines = []
        for t, hist in enumerate(self.bucket_histogram()):
            body = " ".join(f"{size}:{count}" for size, count in hist.items())
            lines.append(f"table {t} buckets={len(self.tables[t])} {body}")
        return "\n".join(lines) + "\n"


def build(vectors, L, m, b, config: GcwsConfig, n_jobs=1) -> AnnIndex:
    L = check_positive_int(L, "L")
    m = check_positive_int(m, "m")
    b = check_bits(b)
    if L * m > config.k:
        raise ValueError(f"L*m = {L * m} exceeds k = {config.k}")
    X = check_signed_matrix(vectors)
    try:
        i_star, _ = sketch_matrix(X, config, normalize=True, n_jobs=n_jobs)
    except EmptyRowError as exc:
        raise KernelDomainError(f"cannot index zero vectors (rows {exc.rows[:10]})") from None
    index = AnnIndex([], m, b, config, X)
    keys = index._table_keys(i_star, L)
    for t in range(L):
        buckets = {}
        for r, key in enumerate(keys[t]):
            buckets.setdefault(key, []).append(r)
        index.tables.append({key: np.asarray(ids, dtype=np.int64) for key, ids in buckets.items()})
    return index


def query(index: AnnIndex, q, top):
    return index.query(q, top)


def brute_force(vectors, q, top):
    """Exact top-``top`` ``(id, ngmm)`` pairs over all ``vectors``, same ordering rule as the index."""
    X = check_signed_matrix(vectors)
    Q = _single_query(q, X.shape[1])
    g = _pairwise(_GINT, Q, X)[0]
    ids = np.arange(X.shape[0])
    order = np.lexsort((ids, -g))[: check_positive_int(top, "top")]
    return [(int(i), float(g[i] / (2.0 - g[i]))) for i in order]


def recall(found, truth):
    """``|found ∩ truth| / |truth|`` over id lists."""
    truth_ids = {i for i, _ in truth}
    if not truth_ids:
        return 1.0
    return len({i for i, _ in found} & truth_ids) / len(truth_ids)


class GCWSNearestNeighbors(BaseEstimator):
    """Hash-table neighbor search under the NGMM (equivalently GInt) similarity.

    Parameters
    ----------
    n_neighbors : int, default=10
    n_tables : int, default=32
        Number of hash tables ``L``.
    band_size : int, default=2
        Signatures concatenated per table key ``m``.
    b : int, default=8
    k : int, default=64
        GCWS samples per vector; must be at least ``n_tables * band_size``.
    seed : int, default=0
    n_jobs : int, default=1
    """

    def __init__(self, n_neighbors=10, n_tables=32, band_size=2, b=8, k=64, seed=0, n_jobs=1):
        self.n_neighbors = n_neighbors
        self.n_tables = n_tables
        self.band_size = band_size
        self.b = b
        self.k = k
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        self.index_ = build(X, self.n_tables, self.band_size, self.b,
                            GcwsConfig(self.k, self.seed), n_jobs=self.n_jobs)
        self.n_features_in_ = self.index_.store.shape[1]
        return self

    def kneighbors(self, X, n_neighbors=None):
        """Return ``(scores, ids)``; rows with fewer candidates are padded with ``nan`` / ``-1``."""
        check_is_fitted(self, "index_")
        n_neighbors = self.n_neighbors if n_neighbors is None else n_neighbors
        X = check_signed_matrix(X, n_features=self.n_features_in_)
        scores = np.full((X.shape[0], n_neighbors), np.nan)
        ids = np.full((X.shape[0], n_neighbors), -1, dtype=np.int64)
        for r in range(X.shape[0]):
            hits = self.index_.query(X[r], n_neighbors)
            for c, (i, s) in enumerate(hits):
                ids[r, c], scores[r, c] = i, s
        return scores, ids
