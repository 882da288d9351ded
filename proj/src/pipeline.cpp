// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/pipeline.hpp"

#include <string>

#include "tokpool/error.hpp"
#include "tokpool/rng.hpp"
#include "tokpool/scoring.hpp"

namespace tokpool {

ForwardResult run_forward(const TokenSet& input, const std::vector<BlockWeights>& blocks,
                          const ModelConfig& config, const ForwardOptions& options) {
  config.validate();
  if (blocks.size() != config.layers) {
    throw UsageError("expected " + std::to_string(config.layers) + " blocks, got " +
                     std::to_string(blocks.size()));
  }
  input.validate();
  if (input.dim() != config.dim) {
    throw DataError("input width " + std::to_string(input.dim()) + " does not match config dim " +
                    std::to_string(config.dim));
  }
  const AttentionMode mode = config.mode.value_or(AttentionMode::kStandard);

  TokenSet tokens = input;
  if (mode == AttentionMode::kCarry && !tokens.counts) {
    tokens.counts = std::vector<double>(tokens.size(), 1.0);
  }

  ForwardResult result;
  std::uint64_t seed_state = options.seed;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::uint64_t layer_seed = splitmix64(seed_state);
    BlockTrace bt = block_forward_traced(tokens, blocks[l], mode, options.block);
    if (options.on_block) options.on_block(l, bt);

    LayerTrace lt;
    lt.layer = l;
    lt.tokens_in = bt.output.size();
    tokens = std::move(bt.output);
    tokens.weights.reset();

    if (config.schedule) {
      const std::int64_t k = (*config.schedule)[l];
      lt.target = k;
      const std::size_t n = tokens.size();
      if (static_cast<std::size_t>(k) + 1 < n) {
        lt.pooled = true;
        if (k == 0) {
          // Only the classification token survives.
          TokenSet kept;
          kept.features = tokens.features.slice_rows(0, 1);
          if (tokens.counts) kept.counts = std::vector<double>{(*tokens.counts)[0]};
          tokens = std::move(kept);
        } else {
          AttentionMaps maps;
          for (auto& h : bt.heads) maps.heads.push_back(std::move(h.attention));
          tokens.weights = significance(maps).values;
          PoolSpec spec;
          spec.method = options.pool_method;
          spec.k = static_cast<std::size_t>(k);
          spec.max_iters = options.max_iters;
          spec.init = options.init;
          spec.seed = layer_seed;
          spec.protect_first = true;
          spec.emit_counts = mode == AttentionMode::kCarry;
          PoolResult pooled = token_pool(tokens, spec);
          lt.loss = pooled.clusters.loss;
          lt.iterations = pooled.clusters.iterations;
          tokens = std::move(pooled.tokens);
          tokens.weights.reset();
        }
      }
    }
    lt.tokens_out = tokens.size();
    result.trace.push_back(lt);
  }
  result.output = std::move(tokens);
  return result;
}

}  // namespace tokpool
