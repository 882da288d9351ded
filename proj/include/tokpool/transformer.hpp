// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "tokpool/config.hpp"
#include "tokpool/matrix.hpp"

namespace tokpool {

struct GridShape {
  std::size_t height = 0;
  std::size_t width = 0;
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// N tokens of width M with optional per-token metadata.
///
/// `grid`, when present, lays out the patch tokens row-major. Its area is
/// either N (no classification token) or N - 1 (row 0 is the classification
/// token and sits outside the grid).
struct TokenSet {
  Matrix features;
  std::optional<std::vector<double>> weights;
  std::optional<std::vector<double>> counts;
  std::optional<GridShape> grid;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws DataError on non-finite features, non-positive weights or
  /// counts, or metadata whose length disagrees with N.
  void validate() const;

  friend bool operator==(const TokenSet&, const TokenSet&) = default;
};

/// Per-token affine layer norm parameters; empty vectors mean scale 1 and
/// shift 0.
struct LayerNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
};

struct BlockWeights {
  std::vector<Matrix> wq;  // H matrices, M x d
  std::vector<Matrix> wk;
  std::vector<Matrix> wv;
  Matrix wo;    // M x M
  Matrix mlp1;  // M x rM
  Matrix mlp2;  // rM x M
  std::optional<double> alpha;
  LayerNormParams ln1;
  LayerNormParams ln2;

  std::size_t heads() const noexcept { return wq.size(); }
  std::size_t dim() const noexcept { return wo.rows(); }
  std::size_t head_dim() const noexcept { return wq.empty() ? 0 : wq.front().cols(); }

  /// Throws UsageError on inconsistent shapes.
  void validate() const;
};

/// H stacked row-stochastic N x N attention matrices.
struct AttentionMaps {
  std::vector<Matrix> heads;

  std::size_t num_heads() const noexcept { return heads.size(); }
  std::size_t tokens() const noexcept { return heads.empty() ? 0 : heads.front().rows(); }
};

/// Everything one attention head produced: A_h, V_h and O_h = A_h V_h.
struct HeadTrace {
  Matrix attention;
  Matrix values;
  Matrix output;
};

struct BlockOptions {
  /// Pre-norm blocks with residual connections. When false the block is the
  /// bare composition MLP(MSA(F)).
  bool residual_and_norm = true;
  double layer_norm_eps = 1e-6;
};

struct BlockTrace {
  TokenSet output;
  std::vector<HeadTrace> heads;
};

std::vector<HeadTrace> attention_heads(const TokenSet& tokens, const BlockWeights& w,
                                       AttentionMode mode);

/// Multi-head self-attention: [O_1, ..., O_H] W^O. Metadata is carried over.
TokenSet msa_forward(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode);

AttentionMaps attention_maps(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode);

TokenSet block_forward(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode,
                       const BlockOptions& options = {});

/// block_forward that also returns the attention heads it evaluated (on the
/// normalised input when residual_and_norm is set).
BlockTrace block_forward_traced(const TokenSet& tokens, const BlockWeights& w, AttentionMode mode,
                                const BlockOptions& options = {});

/// Per-token layer norm.
Matrix layer_norm(const Matrix& x, const LayerNormParams& params, double eps);

/// Exact (erf) GELU, elementwise.
Matrix gelu(Matrix x);

/// L blocks with entries of standard deviation 1/sqrt(M), drawn as normal() / sqrt(M) from one
/// Rng(seed), layer by layer in the order wq, wk, wv (head-major), wo, mlp1,
/// mlp2. alpha comes from the config, or 1 when the config selects
/// normalized_alpha mode without one.
std::vector<BlockWeights> synth_weights(const ModelConfig& config, std::uint64_t seed);

}  // namespace tokpool
