// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace tokpool {

enum class AttentionMode {
  kStandard,         // softmax(Q K^T / sqrt(d))
  kNormalizedAlpha,  // unit-norm q and k rows, logits alpha * (q . k)
  kCarry,            // key i's softmax term multiplied by its carry count
};

std::string_view to_string(AttentionMode mode) noexcept;
/// Parses "standard" | "normalized_alpha" | "carry"; throws UsageError.
AttentionMode parse_attention_mode(std::string_view text);

/// Architecture record shared by the transformer and the cost model.
struct ModelConfig {
  std::size_t layers = 0;
  std::size_t dim = 0;
  std::size_t heads = 1;
  std::size_t mlp_ratio = 4;
  /// Input token count, classification token included.
  std::size_t tokens = 0;
  /// Tokens retained after each block, classification token excluded.
  std::optional<std::vector<std::int64_t>> schedule;
  std::optional<double> alpha;
  std::optional<AttentionMode> mode;

  std::size_t head_dim() const noexcept { return heads == 0 ? 0 : dim / heads; }

  /// Throws UsageError naming the violated constraint.
  void validate() const;
};

/// Scales a schedule recorded for `from_patches` patch tokens to a model with
/// `to_patches` patch tokens: round-half-away-from-zero of K * to / from,
/// clamped to [0, to_patches].
std::vector<std::int64_t> rescale_schedule(const std::vector<std::int64_t>& schedule,
                                           std::size_t from_patches, std::size_t to_patches);

}  // namespace tokpool
