"""Linear, RBF, GMM, GInt and NGMM kernels.

Single pairs are evaluated with a merge join over the sorted sparse entries.
Kernel matrices take one of two paths. Dense-ish data is evaluated block by
block on densified slabs of the sign-split data. Sparse data goes through an
inverted index over the column vectors, so each row only touches the entries
it shares with each column. In both paths every cell is accumulated in a
fixed order that does not depend on ``n_jobs``, so results are bit-for-bit
identical under any schedule.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._validation import check_signed_matrix
from .dataio import SparseVector
from .transform import l1_normalize, sign_split, transform

# Elements per densified block (rows x cols x features).
_BLOCK_BUDGET = 1 << 22
# Below this fill ratio kernel matrices use the sparse path.
_DENSE_FILL = 0.1
_SPARSE_ROWS = 64


class KernelKind(str, enum.Enum):
    LINEAR = "linear"
    RBF = "rbf"
    GMM = "gmm"
    NGMM = "ngmm"
    GINT = "gint"


class KernelDomainError(ValueError):
    """A kernel is undefined for the given inputs (e.g. 0/0 on zero vectors)."""


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    gamma: float | None = None

    def __post_init__(self):
        kind = KernelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is KernelKind.RBF:
            if self.gamma is None:
                raise ValueError("rbf kernel requires gamma")
            if not (math.isfinite(self.gamma) and self.gamma > 0):
                raise ValueError(f"gamma must be positive, got {self.gamma}")
            object.__setattr__(self, "gamma", float(self.gamma))
        elif self.gamma is not None:
            raise ValueError(f"gamma is only valid for the rbf kernel, not {kind.value}")

    @property
    def bounded(self):
        """True for the min-max family, whose values lie in [0, 1]."""
        return self.kind in (KernelKind.GMM, KernelKind.NGMM, KernelKind.GINT)

    def __str__(self):
        if self.kind is KernelKind.RBF:
            return f"rbf(gamma={self.gamma:g})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    spec: KernelSpec
    values: np.ndarray

    @property
    def rows(self):
        return self.values.shape[0]

    @property
    def cols(self):
        return self.values.shape[1]


def _check_pair(u, v):
    if u.dim != v.dim:
        raise ValueError(f"dimension mismatch: {u.dim} vs {v.dim}")


def _min_max_sums(ai, av, bi, bv):
    """Merge join over two sorted sparse supports; returns (sum of min, sum of max)."""
    ai, av, bi, bv = ai.tolist(), av.tolist(), bi.tolist(), bv.tolist()
    p = q = 0
    na, nb = len(ai), len(bi)
    smin = smax = 0.0
    while p < na and q < nb:
        if ai[p] == bi[q]:
            x, y = av[p], bv[q]
            if x < y:
                smin += x
                smax += y
            else:
                smin += y
                smax += x
            p += 1
            q += 1
        elif ai[p] < bi[q]:
            smax += av[p]
            p += 1
        else:
            smax += bv[q]
            q += 1
    while p < na:
        smax += av[p]
        p += 1
    while q < nb:
        smax += bv[q]
        q += 1
    return smin, smax


def gmm(u: SparseVector, v: SparseVector) -> float:
    _check_pair(u, v)
    if u.is_zero() and v.is_zero():
        raise KernelDomainError("GMM undefined on two zero vectors")
    tu, tv = transform(u), transform(v)
    smin, smax = _min_max_sums(tu.indices, tu.values, tv.indices, tv.values)
    return smin / smax


def _normalized_pair(u, v, name):
    _check_pair(u, v)
    if u.is_zero() or v.is_zero():
        raise KernelDomainError(f"{name} requires a normalizable vector")
    return l1_normalize(transform(u)), l1_normalize(transform(v))


def gint(u: SparseVector, v: SparseVector) -> float:
    tu, tv = _normalized_pair(u, v, "GInt")
    smin, _ = _min_max_sums(tu.indices, tu.values, tv.indices, tv.values)
    # normalized mass can round to 1 + ulp
    return min(smin, 1.0)


def ngmm(u: SparseVector, v: SparseVector) -> float:
    tu, tv = _normalized_pair(u, v, "NGMM")
    smin, smax = _min_max_sums(tu.indices, tu.values, tv.indices, tv.values)
    return smin / smax


def ngmm_from_gint(g):
    """NGMM as a monotone function of GInt on normalized data: g / (2 - g)."""
    return g / (2.0 - g)


def linear(u: SparseVector, v: SparseVector) -> float:
    _check_pair(u, v)
    ai, av, bi, bv = u.indices.tolist(), u.values.tolist(), v.indices.tolist(), v.values.tolist()
    p = q = 0
    acc = 0.0
    while p < len(ai) and q < len(bi):
        if ai[p] == bi[q]:
            acc += av[p] * bv[q]
            p += 1
            q += 1
        elif ai[p] < bi[q]:
            p += 1
        else:
            q += 1
    return acc


def rbf(u: SparseVector, v: SparseVector, gamma: float) -> float:
    _check_pair(u, v)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    ai, av, bi, bv = u.indices.tolist(), u.values.tolist(), v.indices.tolist(), v.values.tolist()
    p = q = 0
    d2 = 0.0
    while p < len(ai) or q < len(bi):
        if q >= len(bi) or (p < len(ai) and ai[p] < bi[q]):
            d2 += av[p] * av[p]
            p += 1
        elif p >= len(ai) or bi[q] < ai[p]:
            d2 += bv[q] * bv[q]
            q += 1
        else:
            diff = av[p] - bv[q]
            d2 += diff * diff
            p += 1
            q += 1
    return math.exp(-gamma * d2)


def evaluate(spec: KernelSpec, u: SparseVector, v: SparseVector) -> float:
    kind = spec.kind
    if kind is KernelKind.LINEAR:
        return linear(u, v)
    if kind is KernelKind.RBF:
        return rbf(u, v, spec.gamma)
    if kind is KernelKind.GMM:
        return gmm(u, v)
    if kind is KernelKind.NGMM:
        return ngmm(u, v)
    return gint(u, v)


def _block_values(kind, gamma, A, B):
    """Dense block kernel; A is (r, d), B is (c, d)."""
    if kind is KernelKind.LINEAR:
        return (A[:, None, :] * B[None, :, :]).sum(axis=2)
    if kind is KernelKind.RBF:
        diff = A[:, None, :] - B[None, :, :]
        return np.exp(-gamma * (diff * diff).sum(axis=2))
    smin = np.minimum(A[:, None, :], B[None, :, :]).sum(axis=2)
    if kind is KernelKind.GINT:
        return smin
    smax = np.maximum(A[:, None, :], B[None, :, :]).sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        return smin / smax


def _row_sums(M, fn=None):
    """Per-row sums accumulated sequentially in index order."""
    data = M.data if fn is None else fn(M.data)
    rows = np.repeat(np.arange(M.shape[0]), np.diff(M.indptr))
    return np.bincount(rows, weights=data, minlength=M.shape[0])


def _sparse_rows(kind, A, Bc, r0, r1):
    """Sum over shared features of min (or product) for rows r0:r1 against every column.

    ``Bc`` is the column set in CSC form transposed, i.e. feature-major, so
    the column vectors holding feature ``f`` are ``Bc.indices[Bc.indptr[f]:Bc.indptr[f+1]]``.
    Contributions reach each cell in increasing feature order.
    """
    nc = Bc.shape[1]
    lo, hi = A.indptr[r0], A.indptr[r1]
    feats = A.indices[lo:hi]
    avals = A.data[lo:hi]
    arows = np.repeat(np.arange(r1 - r0), np.diff(A.indptr[r0:r1 + 1]))
    starts = Bc.indptr[feats]
    lengths = Bc.indptr[feats + 1] - starts
    total = int(lengths.sum())
    if total == 0:
        return np.zeros((r1 - r0, nc))
    offsets = np.repeat(starts - np.cumsum(lengths) + lengths, lengths) + np.arange(total)
    a = np.repeat(avals, lengths)
    b = Bc.data[offsets]
    vals = a * b if kind in (KernelKind.LINEAR, KernelKind.RBF) else np.minimum(a, b)
    cells = np.repeat(arows, lengths) * nc + Bc.indices[offsets]
    return np.bincount(cells, weights=vals, minlength=(r1 - r0) * nc).reshape(r1 - r0, nc)


def _dense_path(spec, A, B, out, n_jobs):
    nr, nc, d = A.shape[0], B.shape[0], A.shape[1]
    cstep = max(1, min(nc, _BLOCK_BUDGET // max(d, 1)))
    rstep = max(1, _BLOCK_BUDGET // (cstep * max(d, 1)))
    col_blocks = [(c0, min(c0 + cstep, nc)) for c0 in range(0, nc, cstep)]

    def run_rows(r0):
        r1 = min(r0 + rstep, nr)
        Ad = A[r0:r1].toarray()
        for c0, c1 in col_blocks:
            out[r0:r1, c0:c1] = _block_values(spec.kind, spec.gamma, Ad, B[c0:c1].toarray())

    _run(run_rows, range(0, nr, rstep), n_jobs)


def _sparse_path(spec, A, B, out, n_jobs):
    kind = spec.kind
    nr = A.shape[0]
    # transpose of the CSC form: row f lists the column vectors that hold feature f
    Bc = B.tocsc().T.tocsr()
    Bc.sort_indices()
    if kind in (KernelKind.LINEAR, KernelKind.RBF):
        sa, sb = _row_sums(A, np.square), _row_sums(B, np.square)
    else:
        sa, sb = _row_sums(A), _row_sums(B)

    def run_rows(r0):
        r1 = min(r0 + _SPARSE_ROWS, nr)
        inner = _sparse_rows(kind, A, Bc, r0, r1)
        if kind is KernelKind.LINEAR:
            out[r0:r1] = inner
        elif kind is KernelKind.RBF:
            d2 = np.maximum(sa[r0:r1, None] + sb[None, :] - 2.0 * inner, 0.0)
            out[r0:r1] = np.exp(-spec.gamma * d2)
        elif kind is KernelKind.GINT:
            out[r0:r1] = inner
        else:
            smax = sa[r0:r1, None] + sb[None, :] - inner
            with np.errstate(invalid="ignore", divide="ignore"):
                out[r0:r1] = inner / smax

    _run(run_rows, range(0, nr, _SPARSE_ROWS), n_jobs)


def _run(fn, starts, n_jobs):
    if n_jobs is None or n_jobs == 1 or len(starts) == 1:
        for r0 in starts:
            fn(r0)
    else:
        workers = None if n_jobs < 0 else int(n_jobs)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fn, starts))


def _pairwise(spec, X, Y, n_jobs=1):
    kind = spec.kind
    if kind in (KernelKind.LINEAR, KernelKind.RBF):
        A, B = X, Y
    else:
        normalize = kind is not KernelKind.GMM
        A, B = sign_split(X, normalize=normalize), sign_split(Y, normalize=normalize)
    nr, nc, d = A.shape[0], B.shape[0], A.shape[1]
    out = np.empty((nr, nc), dtype=np.float64)
    if nr == 0 or nc == 0:
        return out
    fill = (A.nnz + B.nnz) / ((nr + nc) * max(d, 1))
    if fill >= _DENSE_FILL:
        _dense_path(spec, A, B, out, n_jobs)
    else:
        _sparse_path(spec, A, B, out, n_jobs)
    if spec.bounded:
        np.clip(out, 0.0, 1.0, out=out)
    return out


def _first_zero_pair(spec, X, Y):
    zx = np.flatnonzero(np.diff(X.indptr) == 0)
    zy = np.flatnonzero(np.diff(Y.indptr) == 0)
    if spec.kind is KernelKind.GMM:
        if zx.size and zy.size:
            return int(zx[0]), int(zy[0])
        return None
    if spec.kind in (KernelKind.NGMM, KernelKind.GINT):
        if zx.size:
            return int(zx[0]), 0
        if zy.size:
            return 0, int(zy[0])
    return None


def kernel_matrix(spec: KernelSpec, rows, cols=None, n_jobs=1) -> KernelMatrix:
    """Evaluate ``K(rows[r], cols[c])`` for every pair.

    ``rows`` and ``cols`` may be lists of :class:`SparseVector`, dense
    arrays or sparse matrices. ``cols=None`` means the self-kernel.
    """
    X = check_signed_matrix(rows)
    Y = X if cols is None else check_signed_matrix(cols, n_features=X.shape[1])
    bad = _first_zero_pair(spec, X, Y)
    if bad is not None:
        r, c = bad
        raise KernelDomainError(
            f"{spec.kind.value} kernel undefined for pair (row {r}, col {c}): zero vector"
        )
    return KernelMatrix(spec, _pairwise(spec, X, Y, n_jobs=n_jobs))


def _kernel_function(kind):
    def fn(X, Y=None, n_jobs=1):
        return kernel_matrix(KernelSpec(kind), X, Y, n_jobs=n_jobs).values

    fn.__name__ = f"{kind.value}_kernel"
    fn.__doc__ = f"{kind.value.upper()} kernel matrix between the rows of X and Y (callable-kernel form)."
    return fn


gmm_kernel = _kernel_function(KernelKind.GMM)
ngmm_kernel = _kernel_function(KernelKind.NGMM)
gint_kernel = _kernel_function(KernelKind.GINT)
