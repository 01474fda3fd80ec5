"""Sparse vectors, labeled datasets and the text formats used by SVM tooling.

Two on-disk formats are supported:

* the sparse labeled format, one sample per line::

      <label> <index>:<value> <index>:<value> ...

  with 1-based, strictly increasing indices;

* the precomputed-kernel format, one row of the kernel matrix per line::

      <label> 0:<serial> 1:<K(x, x_1)> 2:<K(x, x_2)> ...

  where ``serial`` is the 1-based row number.

In memory all indices are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp


class DatasetFormatError(ValueError):
    """Raised for malformed sparse-format input; carries the 1-based line number."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Index/value pairs over a declared dimension.

    Explicit zeros are dropped on construction; indices must be strictly
    increasing and values finite.
    """

    dim: int
    indices: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    values: np.ndarray = field(default_factory=lambda: np.empty(0, np.float64))

    def __post_init__(self):
        dim = int(self.dim)
        if dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        if not np.all(np.isfinite(val)):
            raise ValueError("values must be finite")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= dim:
                raise ValueError(f"indices must lie in [0, {dim})")
            if np.any(np.diff(idx) <= 0):
                raise ValueError("indices must be strictly increasing")
        keep = val != 0.0
        if not keep.all():
            idx, val = idx[keep], val[keep]
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_pairs(cls, dim, pairs: Iterable[tuple[int, float]]):
        pairs = list(pairs)
        if not pairs:
            return cls(dim)
        idx, val = zip(*pairs)
        return cls(dim, np.array(idx, dtype=np.int64), np.array(val, dtype=np.float64))

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x, dtype=np.float64).ravel()
        nz = np.flatnonzero(x)
        return cls(x.size, nz, x[nz])

    @property
    def nnz(self):
        return int(self.indices.size)

    def is_zero(self):
        return self.indices.size == 0

    def to_dense(self):
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def pairs(self):
        return list(zip(self.indices.tolist(), self.values.tolist()))

    def scale(self, c):
        return SparseVector(self.dim, self.indices, self.values * c)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"SparseVector(dim={self.dim}, entries={self.pairs()})"


@dataclass(eq=False)
class LabeledDataset:
    vectors: list
    labels: np.ndarray
    # 1-based file line of each sample, when read from disk
    source_lines: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vectors = list(self.vectors)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if len(self.vectors) == 0:
            raise ValueError("dataset must contain at least one vector")
        if len(self.vectors) != self.labels.size:
            raise ValueError(
                f"{len(self.vectors)} vectors but {self.labels.size} labels"
            )
        dims = {v.dim for v in self.vectors}
        if len(dims) != 1:
            raise ValueError(f"vectors have differing dimensions: {sorted(dims)}")

    @property
    def dim(self):
        return self.vectors[0].dim

    def __len__(self):
        return len(self.vectors)

    def to_csr(self):
        return vectors_to_csr(self.vectors)

    @classmethod
    def from_matrix(cls, X, labels):
        return cls(csr_to_vectors(X), labels)

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return (
            len(self) == len(other)
            and np.array_equal(self.labels, other.labels)
            and all(a == b for a, b in zip(self.vectors, other.vectors))
        )


def vectors_to_csr(vectors: Sequence[SparseVector], dim=None):
    """Stack sparse vectors into a CSR matrix (rows keep their sorted indices)."""
    if dim is None:
        if not vectors:
            raise ValueError("cannot infer dim from an empty vector list")
        dim = vectors[0].dim
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for r, v in enumerate(vectors):
        if v.dim != dim:
            raise ValueError(f"row {r} has dim {v.dim}, expected {dim}")
        indptr[r + 1] = indptr[r] + v.nnz
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices = np.empty(0, np.int64)
        data = np.empty(0, np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def csr_to_vectors(X):
    if sp.issparse(X):
        X = sp.csr_matrix(X, dtype=np.float64)
        X.sum_duplicates()
        X.sort_indices()
        n, dim = X.shape
        return [
            SparseVector(dim, X.indices[X.indptr[r]:X.indptr[r + 1]],
                         X.data[X.indptr[r]:X.indptr[r + 1]])
            for r in range(n)
        ]
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return [SparseVector.from_dense(row) for row in X]


_INT64_MAX = 2**63 - 1


def _parse_label(tok):
    try:
        label = int(tok)
    except ValueError:
        val = float(tok)
        if not math.isfinite(val) or val != int(val):
            raise ValueError(f"label {tok!r} is not an integer") from None
        label = int(val)
    if abs(label) > _INT64_MAX:
        raise ValueError(f"label {tok!r} does not fit in 64 bits")
    return label


def read_sparse_dataset(path, dim_override=None) -> LabeledDataset:
    """Read a sparse labeled dataset (1-based indices on disk).

    Blank lines and ``#`` comments are ignored. ``dim`` is the largest index
    seen, or ``dim_override`` if that is larger.
    """
    if dim_override is not None and int(dim_override) < 1:
        raise ValueError("dim_override must be a positive integer")
    labels = []
    rows = []
    linenos = []
    max_index = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            toks = line.split()
            try:
                label = _parse_label(toks[0])
            except ValueError as exc:
                raise DatasetFormatError(f"bad label: {exc}", lineno, path) from None
            idx = []
            val = []
            prev = 0
            for tok in toks[1:]:
                head, sep, tail = tok.partition(":")
                if not sep:
                    raise DatasetFormatError(f"expected index:value, got {tok!r}", lineno, path)
                try:
                    i = int(head)
                    x = float(tail)
                except ValueError:
                    raise DatasetFormatError(f"cannot parse {tok!r}", lineno, path) from None
                if i < 1 or i > _INT64_MAX:
                    raise DatasetFormatError(f"index {i} is out of range", lineno, path)
                if i <= prev:
                    raise DatasetFormatError(
                        f"indices not strictly increasing ({prev} then {i})", lineno, path
                    )
                if not math.isfinite(x):
                    raise DatasetFormatError(f"non-finite value in {tok!r}", lineno, path)
                prev = i
                idx.append(i - 1)
                val.append(x)
            max_index = max(max_index, prev)
            labels.append(label)
            rows.append((idx, val))
            linenos.append(lineno)
    if not rows:
        raise DatasetFormatError("no samples found", path=path)
    dim = max(max_index, 1)
    if dim_override is not None:
        if int(dim_override) < max_index:
            raise DatasetFormatError(
                f"dim_override={dim_override} is smaller than max index {max_index}", path=path
            )
        dim = int(dim_override)
    vectors = [SparseVector(dim, np.array(i, np.int64), np.array(v, np.float64)) for i, v in rows]
    return LabeledDataset(vectors, labels, linenos)


def with_dim(dataset, dim):
    """Copy of ``dataset`` re-declared over a larger dimension."""
    if dim < dataset.dim:
        raise ValueError(f"cannot shrink dim from {dataset.dim} to {dim}")
    vectors = [SparseVector(dim, v.indices, v.values) for v in dataset.vectors]
    return LabeledDataset(vectors, dataset.labels, dataset.source_lines)


def format_value(x):
    """Shortest round-trip decimal form of a float, with a trailing ``.0`` dropped."""
    s = repr(float(x))
    if s.endswith(".0"):
        s = s[:-2]
    return s


def _sparse_line(label, indices, values):
    parts = [str(int(label))]
    parts.extend(f"{i + 1}:{format_value(x)}" for i, x in zip(indices.tolist(), values.tolist()))
    return " ".join(parts)


def write_sparse_dataset(dataset: LabeledDataset, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for label, v in zip(dataset.labels.tolist(), dataset.vectors):
            fh.write(_sparse_line(label, v.indices, v.values))
            fh.write("\n")


def write_sparse_matrix(X, labels, path):
    """Write a CSR matrix with labels in the sparse labeled format."""
    X = sp.csr_matrix(X)
    X.sort_indices()
    labels = np.asarray(labels).ravel()
    if labels.size != X.shape[0]:
        raise ValueError(f"{X.shape[0]} rows but {labels.size} labels")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in range(X.shape[0]):
            lo, hi = X.indptr[r], X.indptr[r + 1]
            fh.write(_sparse_line(labels[r], X.indices[lo:hi], X.data[lo:hi]))
            fh.write("\n")


def write_precomputed_kernel(matrix, labels, path, n_train=None):
    """Write kernel rows in the precomputed-kernel format.

    ``matrix`` is a :class:`~gintkernel.kernels.KernelMatrix` or a 2-D array.
    If ``n_train`` is given the column count is checked against it.
    """
    values = np.asarray(getattr(matrix, "values", matrix), dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("kernel matrix must be 2-D")
    labels = np.asarray(labels).ravel()
    if labels.size != values.shape[0]:
        raise ValueError(f"kernel matrix has {values.shape[0]} rows but {labels.size} labels")
    if n_train is not None and values.shape[1] != n_train:
        raise ValueError(f"kernel matrix has {values.shape[1]} columns, expected {n_train}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in range(values.shape[0]):
            row = " ".join(f"{c + 1}:{format_value(x)}" for c, x in enumerate(values[r].tolist()))
            line = f"{int(labels[r])} 0:{r + 1}"
            fh.write(f"{line} {row}\n" if row else line + "\n")


def read_precomputed_kernel(path):
    """Read a precomputed-kernel file back into ``(labels, values)``."""
    labels = []
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            try:
                labels.append(_parse_label(toks[0]))
                head, _, serial = toks[1].partition(":")
                if head != "0":
                    raise ValueError("first field must be 0:<serial>")
                if int(serial) != len(rows) + 1:
                    raise ValueError(f"serial {serial} out of order")
                rows.append([float(t.partition(":")[2]) for t in toks[2:]])
            except (ValueError, IndexError) as exc:
                raise DatasetFormatError(str(exc), lineno, path) from None
    return np.asarray(labels, dtype=np.int64), np.asarray(rows, dtype=np.float64)
