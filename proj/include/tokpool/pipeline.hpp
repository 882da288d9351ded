// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tokpool/config.hpp"
#include "tokpool/pooling.hpp"
#include "tokpool/transformer.hpp"

namespace tokpool {

struct ForwardOptions {
  PoolMethod pool_method = PoolMethod::kWeightedKMedoids;
  ClusterInit init = ClusterInit::kTopKWeight;
  std::size_t max_iters = 5;
  std::uint64_t seed = 0;
  BlockOptions block;
  /// Called after every block, before pooling.
  std::function<void(std::size_t layer, const BlockTrace&)> on_block;
};

struct LayerTrace {
  std::size_t layer = 0;
  std::size_t tokens_in = 0;
  std::size_t tokens_out = 0;
  std::optional<std::int64_t> target;  // K_l when a schedule is present
  bool pooled = false;
  /// Reconstruction loss of the pooling step; absent when nothing was pooled
  /// or when only the classification token survives.
  std::optional<double> loss;
  std::size_t iterations = 0;
};

struct ForwardResult {
  TokenSet output;
  std::vector<LayerTrace> trace;
};

/// Runs the blocks in order. After block l, when the config carries a
/// schedule, the tokens are pooled to K_l patch tokens plus the
/// classification token (row 0), so n_{l+1} = min(n_l, K_l + 1). The pooling
/// weights are the significance scores of that block's attention maps.
ForwardResult run_forward(const TokenSet& input, const std::vector<BlockWeights>& blocks,
                          const ModelConfig& config, const ForwardOptions& options = {});

}  // namespace tokpool
