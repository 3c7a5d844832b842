"""Exact, modular and one-parameter linear algebra."""

from __future__ import annotations

from .exact import (
    SparseEchelon,
    intersect,
    kernel_basis,
    rank_bareiss,
    rank_exact,
    rref,
    sparse_intersect,
    sparse_kernel_dim,
    sparse_rank,
)
from .modular import (
    BudgetExceeded,
    MinRankCertificate,
    RankCertificate,
    certified_rank_modp,
    integer_matrix,
    min_rank_certificate,
    projective_point,
    projective_point_count,
    rank_modp,
)
from .parametric import (
    QX,
    X,
    DimensionBudget,
    ParametricRank,
    TooManyParameters,
    as_qx,
    rank_parametric,
    specialize,
)

__all__ = [
    "BudgetExceeded",
    "DimensionBudget",
    "MinRankCertificate",
    "ParametricRank",
    "QX",
    "RankCertificate",
    "SparseEchelon",
    "TooManyParameters",
    "X",
    "as_qx",
    "certified_rank_modp",
    "integer_matrix",
    "intersect",
    "kernel_basis",
    "min_rank_certificate",
    "projective_point",
    "projective_point_count",
    "rank_bareiss",
    "rank_exact",
    "rank_modp",
    "rank_parametric",
    "rref",
    "sparse_intersect",
    "sparse_kernel_dim",
    "sparse_rank",
    "specialize",
]
