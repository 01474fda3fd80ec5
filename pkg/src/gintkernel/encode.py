"""b-bit one-hot encoding of GCWS sketches.

Each of the ``k`` samples keeps the lowest ``b`` bits ``v`` of its ``i*`` and
becomes a block of width ``2**b`` with a single one at position
``2**b - 1 - v`` (so ``v = 3`` with ``b = 2`` is ``[1 0 0 0]`` and ``v = 0``
is ``[0 0 0 1]``). Concatenated, that is a binary vector of length
``2**b * k`` with exactly ``k`` ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .gcws import GCWSHasher, GcwsSketch

MAX_BITS = 16


def check_bits(b):
    if isinstance(b, bool) or int(b) != b or not 1 <= b <= MAX_BITS:
        raise ValueError(f"b must be an integer in [1, {MAX_BITS}], got {b!r}")
    return int(b)


def low_bits(i_star, b):
    return np.asarray(i_star, dtype=np.int64) & ((1 << b) - 1)


def one_hot_positions(i_star, b):
    """Global one-hot column for each sample (``i_star`` has shape ``(..., k)``)."""
    i_star = np.asarray(i_star, dtype=np.int64)
    width = 1 << b
    k = i_star.shape[-1]
    return np.arange(k, dtype=np.int64) * width + (width - 1 - low_bits(i_star, b))


@dataclass(frozen=True, eq=False)
class EncodedFeatures:
    b: int
    k: int
    ones: np.ndarray

    @property
    def length(self):
        return (1 << self.b) * self.k

    def to_dense(self):
        out = np.zeros(self.length, dtype=np.int8)
        out[self.ones] = 1
        return out

    def block(self, j):
        width = 1 << self.b
        return self.to_dense()[j * width:(j + 1) * width]

    def __eq__(self, other):
        if not isinstance(other, EncodedFeatures):
            return NotImplemented
        return self.b == other.b and self.k == other.k and np.array_equal(self.ones, other.ones)


def encode(sketch: GcwsSketch, b: int) -> EncodedFeatures:
    b = check_bits(b)
    return EncodedFeatures(b, sketch.config.k, one_hot_positions(sketch.i_star, b))


def encoded_dot(x: EncodedFeatures, y: EncodedFeatures) -> int:
    if x.b != y.b or x.k != y.k:
        raise ValueError(f"shape mismatch: (b={x.b}, k={x.k}) vs (b={y.b}, k={y.k})")
    return int(np.count_nonzero(x.ones == y.ones))


def encoded_matrix(i_star, b):
    """CSR matrix ``(n, 2**b * k)`` from an ``(n, k)`` array of ``i*`` values."""
    b = check_bits(b)
    i_star = np.atleast_2d(np.asarray(i_star, dtype=np.int64))
    n, k = i_star.shape
    cols = one_hot_positions(i_star, b).ravel()
    data = np.ones(n * k, dtype=np.float64)
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    return sp.csr_matrix((data, cols, indptr), shape=(n, (1 << b) * k))


class GCWSEncoder(TransformerMixin, BaseEstimator):
    """Linearize the NGMM (or GMM) kernel: GCWS hashing followed by b-bit one-hot encoding.

    The output is a sparse binary matrix of shape ``(n, 2**b * k)`` with
    exactly ``k`` ones per row, ready for any linear model.

    Parameters
    ----------
    k : int, default=256
    b : int, default=8
        Bits kept from each ``i*``; ``1 <= b <= 16``.
    seed : int, default=0
    normalize : bool, default=True
    n_jobs : int, default=1
    """

    def __init__(self, k=256, b=8, seed=0, normalize=True, n_jobs=1):
        self.k = k
        self.b = b
        self.seed = seed
        self.normalize = normalize
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        check_bits(self.b)
        self.hasher_ = GCWSHasher(self.k, self.seed, self.normalize, self.n_jobs).fit(X)
        self.n_features_in_ = self.hasher_.n_features_in_
        return self

    def transform(self, X):
        check_is_fitted(self, "hasher_")
        return encoded_matrix(self.hasher_.transform(X), self.b)
