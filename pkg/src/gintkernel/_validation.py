"""Input validation shared by the estimators."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils.validation import check_array

from .dataio import LabeledDataset, SparseVector, vectors_to_csr


def check_signed_matrix(X, n_features=None):
    """Return ``X`` as a finite float64 CSR matrix without stored zeros.

    Accepts dense arrays, scipy sparse matrices, a list of
    :class:`SparseVector` or a :class:`LabeledDataset`.
    """
    if isinstance(X, LabeledDataset):
        X = X.to_csr()
    elif isinstance(X, (list, tuple)) and X and isinstance(X[0], SparseVector):
        X = vectors_to_csr(X)
    X = check_array(X, accept_sparse="csr", dtype=np.float64, ensure_all_finite=True)
    if not sp.issparse(X):
        X = sp.csr_matrix(X)
    else:
        X = X.copy()
    X.sum_duplicates()
    X.eliminate_zeros()
    X.sort_indices()
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_positive_int(value, name, minimum=1):
    if isinstance(value, (bool, np.bool_)) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed
