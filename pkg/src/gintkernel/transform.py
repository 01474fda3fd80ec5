"""Sign-splitting transform: signed D-dim data to nonnegative 2D-dim data.

Original coordinate ``i`` (0-based) owns the slot pair ``(2i, 2i + 1)``.
A positive entry goes to the first slot, the magnitude of a negative entry
to the second. Zeros produce nothing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_signed_matrix
from .dataio import SparseVector


@dataclass(frozen=True, eq=False)
class TransformedVector:
    dim2: int
    indices: np.ndarray
    values: np.ndarray
    l1_normalized: bool = False

    def __post_init__(self):
        if self.dim2 < 2 or self.dim2 % 2:
            raise ValueError(f"dim2 must be a positive even integer, got {self.dim2}")
        if self.values.size and not np.all(self.values > 0):
            raise ValueError("transformed values must be strictly positive")

    @property
    def nnz(self):
        return int(self.indices.size)

    def is_empty(self):
        return self.indices.size == 0

    def total(self):
        return float(self.values.sum())

    def to_dense(self):
        out = np.zeros(self.dim2)
        out[self.indices] = self.values
        return out

    def pairs(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def __eq__(self, other):
        if not isinstance(other, TransformedVector):
            return NotImplemented
        return (
            self.dim2 == other.dim2
            and self.l1_normalized == other.l1_normalized
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return (f"TransformedVector(dim2={self.dim2}, entries={self.pairs()}, "
                f"l1_normalized={self.l1_normalized})")


def transform(u: SparseVector) -> TransformedVector:
    neg = u.values < 0
    idx = 2 * u.indices + neg
    val = np.abs(u.values)
    return TransformedVector(2 * u.dim, idx, val, False)


def l1_normalize(t: TransformedVector) -> TransformedVector:
    if t.is_empty():
        raise ValueError("cannot normalize zero vector")
    values = t.values / t.values.sum()
    keep = values > 0  # tiny entries can underflow against a huge total
    if not keep.all():
        return TransformedVector(t.dim2, t.indices[keep], values[keep], True)
    return TransformedVector(t.dim2, t.indices, values, True)


def inverse_transform(t: TransformedVector) -> SparseVector:
    """Recover the signed vector from an (unnormalized) transformed vector."""
    sign = np.where(t.indices % 2 == 1, -1.0, 1.0)
    return SparseVector(t.dim2 // 2, t.indices // 2, sign * t.values)


def sign_split(X, normalize=False):
    """Apply the transform row-wise to a dense or sparse matrix.

    Returns a CSR matrix of shape ``(n, 2 * D)`` with sorted indices. With
    ``normalize=True`` every row is scaled to unit L1 norm; all-zero rows are
    left empty (callers that need normalized rows must reject them).
    """
    X = check_signed_matrix(X)
    n, d = X.shape
    neg = X.data < 0
    indices = 2 * X.indices.astype(np.int64) + neg
    data = np.abs(X.data)
    out = sp.csr_matrix((data, indices, X.indptr.copy()), shape=(n, 2 * d))
    if normalize:
        sums = np.asarray(out.sum(axis=1)).ravel()
        scale = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
        out.data = out.data * np.repeat(scale, np.diff(out.indptr))
        out.eliminate_zeros()
    return out


def row_to_transformed(T, r, normalized):
    lo, hi = T.indptr[r], T.indptr[r + 1]
    return TransformedVector(T.shape[1], T.indices[lo:hi].astype(np.int64),
                             T.data[lo:hi].copy(), normalized)


class SignSplitTransformer(TransformerMixin, BaseEstimator):
    """Map signed features to nonnegative paired features, optionally L1-normalized.

    Parameters
    ----------
    normalize : bool, default=False
        Scale each output row to unit L1 norm. Zero rows raise ``ValueError``.
    """

    def __init__(self, normalize=False):
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_signed_matrix(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_signed_matrix(X, n_features=self.n_features_in_)
        if self.normalize:
            empty = np.flatnonzero(np.diff(X.indptr) == 0)
            if empty.size:
                raise ValueError(f"cannot normalize zero vector (rows {empty[:5].tolist()})")
        return sign_split(X, normalize=self.normalize)

    def inverse_transform(self, T):
        T = sp.csr_matrix(T)
        n, d2 = T.shape
        sign = np.where(T.indices % 2 == 1, -1.0, 1.0)
        return sp.csr_matrix((sign * T.data, T.indices // 2, T.indptr.copy()), shape=(n, d2 // 2))
