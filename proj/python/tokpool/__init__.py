# Copyright 2026 The tokpool Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the tokpool C++ library."""

from ._tokpool import (
    DataError,
    UsageError,
    block_flops,
    chamfer_loss,
    model_flops,
    pairwise_sq_dists,
    read_matrix,
    significance,
    softmax_rows,
    token_pool,
    verify_equivalence,
    write_matrix,
)

__all__ = [
    "DataError",
    "UsageError",
    "block_flops",
    "chamfer_loss",
    "model_flops",
    "pairwise_sq_dists",
    "read_matrix",
    "significance",
    "softmax_rows",
    "token_pool",
    "verify_equivalence",
    "write_matrix",
]
