// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/costmodel.hpp"

#include <algorithm>
#include <string>

#include "tokpool/error.hpp"

namespace tokpool {

BlockFlops block_flops(std::size_t n_tokens, const ModelConfig& config) {
  const std::uint64_t n = n_tokens;
  const std::uint64_t m = config.dim;
  const std::uint64_t r = config.mlp_ratio;
  return {
      .attention = 2 * n * n * m,
      .qkv = 3 * n * m * m,
      .oproj = n * m * m,
      .mlp = 2 * r * n * m * m,
  };
}

FlopReport model_flops(const ModelConfig& config, std::optional<ClusteringCost> clustering) {
  config.validate();
  if (clustering && clustering->iters == 0) throw UsageError("clustering iterations must be >= 1");
  const std::uint64_t m = config.dim;

  FlopReport report;
  report.per_layer.reserve(config.layers);
  std::uint64_t n = config.tokens;
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerFlops layer;
    layer.tokens = n;
    layer.block = block_flops(n, config);
    std::uint64_t next = n;
    if (config.schedule) {
      const auto k = static_cast<std::uint64_t>((*config.schedule)[l]);
      next = std::min(n, k + 1);
      if (clustering && k + 1 < n) {
        const std::uint64_t t = clustering->iters;
        layer.clustering = clustering->algo == ClusteringAlgo::kKMeans
                               ? t * k * n * m
                               : n * n * m + t * k * n;
      }
    }
    report.totals.attention += layer.block.attention;
    report.totals.qkv += layer.block.qkv;
    report.totals.oproj += layer.block.oproj;
    report.totals.mlp += layer.block.mlp;
    report.clustering += layer.clustering;
    report.per_layer.push_back(layer);
    n = next;
  }
  report.grand_total = report.totals.total() + report.clustering;
  return report;
}

FlopShares breakdown_fractions(const FlopReport& report) {
  if (report.grand_total == 0) throw DataError("flop report has a zero total");
  const auto total = static_cast<double>(report.grand_total);
  return {
      .attention = static_cast<double>(report.totals.attention) / total,
      .qkv = static_cast<double>(report.totals.qkv) / total,
      .oproj = static_cast<double>(report.totals.oproj) / total,
      .mlp = static_cast<double>(report.totals.mlp) / total,
      .clustering = static_cast<double>(report.clustering) / total,
  };
}

ClusteringAlgo parse_clustering_algo(std::string_view text) {
  if (text == "kmeans" || text == "wkmeans") return ClusteringAlgo::kKMeans;
  if (text == "kmedoids" || text == "wkmedoids") return ClusteringAlgo::kKMedoids;
  throw UsageError("unknown clustering algorithm '" + std::string(text) + "'");
}

std::string_view to_string(ClusteringAlgo algo) noexcept {
  return algo == ClusteringAlgo::kKMeans ? "kmeans" : "kmedoids";
}

}  // namespace tokpool
