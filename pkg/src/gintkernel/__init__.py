"""Generalized intersection (GInt), NGMM and GMM kernels for signed data,
with GCWS hashing to linearize them."""

from .ann import AnnIndex, GCWSNearestNeighbors
from .dataio import (
    LabeledDataset,
    SparseVector,
    read_sparse_dataset,
    write_precomputed_kernel,
    write_sparse_dataset,
)
from .encode import EncodedFeatures, GCWSEncoder, encode, encoded_dot
from .gcws import (
    CollisionMode,
    GCWSHasher,
    GcwsConfig,
    GcwsSignature,
    GcwsSketch,
    collision_rate,
    sketch,
    variates,
)
from .kernels import (
    KernelKind,
    KernelMatrix,
    KernelSpec,
    gint,
    gint_kernel,
    gmm,
    gmm_kernel,
    kernel_matrix,
    linear,
    ngmm,
    ngmm_kernel,
    rbf,
)
from .linclf import LinearModel, OneVsRestLogisticGD
from .transform import SignSplitTransformer, TransformedVector, l1_normalize, transform

__version__ = "0.1.0"

__all__ = [
    "AnnIndex",
    "CollisionMode",
    "EncodedFeatures",
    "GCWSEncoder",
    "GCWSHasher",
    "GCWSNearestNeighbors",
    "GcwsConfig",
    "GcwsSignature",
    "GcwsSketch",
    "KernelKind",
    "KernelMatrix",
    "KernelSpec",
    "LabeledDataset",
    "LinearModel",
    "OneVsRestLogisticGD",
    "SignSplitTransformer",
    "SparseVector",
    "TransformedVector",
    "collision_rate",
    "encode",
    "encoded_dot",
    "gint",
    "gint_kernel",
    "gmm",
    "gmm_kernel",
    "kernel_matrix",
    "l1_normalize",
    "linear",
    "ngmm",
    "ngmm_kernel",
    "rbf",
    "read_sparse_dataset",
    "sketch",
    "transform",
    "variates",
    "write_precomputed_kernel",
    "write_sparse_dataset",
]
