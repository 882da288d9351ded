// Copyright 2026 The tokpool Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokpool/config.hpp"

#include <gtest/gtest.h>

#include "tokpool/error.hpp"

namespace tokpool {
namespace {

ModelConfig deit_s() {
  ModelConfig c;
  c.layers = 12;
  c.dim = 384;
  c.heads = 6;
  c.tokens = 197;
  return c;
}

TEST(ModelConfig, ValidDeitSmall) {
  const ModelConfig c = deit_s();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.head_dim(), 64u);
  EXPECT_EQ(c.mlp_ratio, 4u);
}

TEST(ModelConfig, RejectsBadShapes) {
  ModelConfig c = deit_s();
  c.heads = 5;
  EXPECT_THROW(c.validate(), UsageError);
  c = deit_s();
  c.layers = 0;
  EXPECT_THROW(c.validate(), UsageError);
  c = deit_s();
  c.schedule = std::vector<std::int64_t>(11, 1);
  EXPECT_THROW(c.validate(), UsageError);
  c.schedule = std::vector<std::int64_t>(12, 1);
  (*c.schedule)[3] = -1;
  EXPECT_THROW(c.validate(), UsageError);
  c = deit_s();
  c.alpha = 0.0;
  EXPECT_THROW(c.validate(), UsageError);
}

TEST(AttentionMode, RoundTripsNames) {
  for (auto m : {AttentionMode::kStandard, AttentionMode::kNormalizedAlpha, AttentionMode::kCarry}) {
    EXPECT_EQ(parse_attention_mode(to_string(m)), m);
  }
  EXPECT_EQ(to_string(AttentionMode::kNormalizedAlpha), "normalized_alpha");
  EXPECT_THROW(parse_attention_mode("softmax"), UsageError);
}

TEST(RescaleSchedule, ProportionalRoundingAndClamp) {
  // 194 * 49 / 196 = 48.5 rounds away from zero; 10 * 49 / 196 = 2.5 likewise.
  const std::vector<std::int64_t> level5{194, 183, 142, 89, 41, 20, 10, 7, 0, 0, 0, 0};
  const std::vector<std::int64_t> expected{49, 46, 36, 22, 10, 5, 3, 2, 0, 0, 0, 0};
  EXPECT_EQ(rescale_schedule(level5, 196, 49), expected);
  EXPECT_EQ(rescale_schedule({300}, 196, 49), (std::vector<std::int64_t>{49}));
  EXPECT_THROW(rescale_schedule({1}, 0, 49), UsageError);
}

}  // namespace
}  // namespace tokpool
