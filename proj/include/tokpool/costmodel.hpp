// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "tokpool/config.hpp"

namespace tokpool {

/// Flop counts use one flop per multiply-accumulate. Softmax exponentials,
/// layer norms and elementwise additions are not counted.
struct BlockFlops {
  std::uint64_t attention = 0;  // Q K^T and A V: 2 n^2 M
  std::uint64_t qkv = 0;        // 3 n M^2
  std::uint64_t oproj = 0;      // n M^2
  std::uint64_t mlp = 0;        // 2 r n M^2

  std::uint64_t total() const noexcept { return attention + qkv + oproj + mlp; }
  friend bool operator==(const BlockFlops&, const BlockFlops&) = default;
};

enum class ClusteringAlgo { kKMeans, kKMedoids };

struct ClusteringCost {
  ClusteringAlgo algo = ClusteringAlgo::kKMedoids;
  std::size_t iters = 5;
};

struct LayerFlops {
  std::size_t tokens = 0;  // n_l, classification token included
  BlockFlops block;
  std::uint64_t clustering = 0;

  std::uint64_t total() const noexcept { return block.total() + clustering; }
  friend bool operator==(const LayerFlops&, const LayerFlops&) = default;
};

struct FlopReport {
  std::vector<LayerFlops> per_layer;
  BlockFlops totals;
  std::uint64_t clustering = 0;
  std::uint64_t grand_total = 0;

  friend bool operator==(const FlopReport&, const FlopReport&) = default;
};

struct FlopShares {
  double attention = 0.0;
  double qkv = 0.0;
  double oproj = 0.0;
  double mlp = 0.0;
  double clustering = 0.0;
};

BlockFlops block_flops(std::size_t n_tokens, const ModelConfig& config);

/// Prices every layer with its token count: n_1 = N and
/// n_{l+1} = min(n_l, K_l + 1). A layer that downsamples (K_l + 1 < n_l)
/// adds clustering overhead:
///   K-Means   T * K_l * n_l * M            (assignment distances)
///   K-Medoids n_l^2 * M + T * K_l * n_l    (one distance matrix, then
///                                           cached-distance assignment)
FlopReport model_flops(const ModelConfig& config,
                       std::optional<ClusteringCost> clustering = std::nullopt);

/// Category shares of the grand total; throws DataError on a zero total.
FlopShares breakdown_fractions(const FlopReport& report);

ClusteringAlgo parse_clustering_algo(std::string_view text);
std::string_view to_string(ClusteringAlgo algo) noexcept;

}  // namespace tokpool
