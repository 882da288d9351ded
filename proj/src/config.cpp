// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tokpool/error.hpp"

namespace tokpool {

std::string_view to_string(AttentionMode mode) noexcept {
  switch (mode) {
    case AttentionMode::kStandard:
      return "standard";
    case AttentionMode::kNormalizedAlpha:
      return "normalized_alpha";
    case AttentionMode::kCarry:
      return "carry";
  }
  return "standard";
}

AttentionMode parse_attention_mode(std::string_view text) {
  if (text == "standard") return AttentionMode::kStandard;
  if (text == "normalized_alpha") return AttentionMode::kNormalizedAlpha;
  if (text == "carry") return AttentionMode::kCarry;
  throw UsageError("unknown attention mode '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (layers == 0) throw UsageError("config: layers must be >= 1");
  if (dim == 0) throw UsageError("config: dim must be >= 1");
  if (heads == 0) throw UsageError("config: heads must be >= 1");
  if (dim % heads != 0) {
    throw UsageError("config: dim " + std::to_string(dim) + " is not divisible by heads " +
                     std::to_string(heads));
  }
  if (mlp_ratio == 0) throw UsageError("config: mlp_ratio must be >= 1");
  if (tokens == 0) throw UsageError("config: tokens must be >= 1");
  if (schedule) {
    if (schedule->size() != layers) {
      throw UsageError("config: schedule has " + std::to_string(schedule->size()) +
                       " entries, expected " + std::to_string(layers));
    }
    for (std::size_t l = 0; l < schedule->size(); ++l) {
      if ((*schedule)[l] < 0) {
        throw UsageError("config: schedule entry " + std::to_string(l) + " is negative");
      }
    }
  }
  if (alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) {
    throw UsageError("config: alpha must be a positive finite number");
  }
}

std::vector<std::int64_t> rescale_schedule(const std::vector<std::int64_t>& schedule,
                                           std::size_t from_patches, std::size_t to_patches) {
  if (from_patches == 0) throw UsageError("rescale_schedule: source patch count is zero");
  std::vector<std::int64_t> out;
  out.reserve(schedule.size());
  const double scale = static_cast<double>(to_patches) / static_cast<double>(from_patches);
  for (std::int64_t k : schedule) {
    const auto scaled = static_cast<std::int64_t>(std::lround(static_cast<double>(k) * scale));
    out.push_back(std::clamp<std::int64_t>(scaled, 0, static_cast<std::int64_t>(to_patches)));
  }
  return out;
}

}  // namespace tokpool
