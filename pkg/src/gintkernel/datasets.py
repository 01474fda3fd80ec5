"""Small synthetic datasets for demos and tests."""
from __future__ import annotations

import numpy as np


def make_xor(n, seed=0):
    """Uniform points on [-1, 1]^2 labeled 1 where both coordinates share a sign."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = (X[:, 0] * X[:, 1] > 0).astype(np.int64)
    return X, y


def make_signed_sparse(n, dim, density=0.5, seed=0):
    """Dense-stored matrix with mixed-sign Gaussian entries, about ``density`` of them nonzero.

    Every row gets at least one nonzero.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim)) * (rng.random((n, dim)) < density)
    empty = ~X.any(axis=1)
    X[empty, rng.integers(0, dim, size=int(empty.sum()))] = 1.0
    return X


def make_clusters(n, dim, n_clusters=50, noise=0.3, density=0.5, seed=0):
    """Signed sparse points scattered around random sparse centers; returns ``(X, cluster_id)``."""
    rng = np.random.default_rng(seed)
    centers = make_signed_sparse(n_clusters, dim, density, seed=int(rng.integers(2**32)))
    labels = rng.integers(0, n_clusters, size=n)
    X = centers[labels] + noise * rng.normal(size=(n, dim)) * (centers[labels] != 0)
    return X, labels
