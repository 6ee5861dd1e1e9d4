// Copyright 2026 The texbias Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "texbias/error.hpp"
#include "texbias/metrics.hpp"

namespace texbias {
namespace {

TEST(Dice, IdenticalMapsScoreOne) {
  const auto lm = testing::random_labels({6, 6, 6}, 4, 1);
  const auto d = dice_per_class(lm, lm);
  for (double v : d.values) EXPECT_EQ(v, 1.0);
}

TEST(Dice, BothEmptyIsFlaggedOne) {
  const LabelMap a({2, 1, 1}, {0, 1}, 3);
  const auto d = dice_per_class(a, a);
  EXPECT_EQ(d.values[2], 1.0);
  EXPECT_EQ(d.flags[2], DiceFlag::kBothEmpty);
  EXPECT_EQ(d.flags[1], DiceFlag::kNormal);
}

TEST(Dice, DisjointScoresZero) {
  const LabelMap pred({4, 1, 1}, {1, 1, 0, 0}, 2);
  const LabelMap gt({4, 1, 1}, {0, 0, 1, 1}, 2);
  const auto d = dice_per_class(pred, gt);
  EXPECT_EQ(d.values[0], 0.0);
  EXPECT_EQ(d.values[1], 0.0);
}

TEST(Dice, OneEmptyIsFlaggedZero) {
  const LabelMap pred({3, 1, 1}, {0, 0, 0}, 2);
  const LabelMap gt({3, 1, 1}, {0, 1, 0}, 2);
  const auto d = dice_per_class(pred, gt);
  EXPECT_EQ(d.values[1], 0.0);
  EXPECT_EQ(d.flags[1], DiceFlag::kOneEmpty);
}

TEST(Dice, HandBuiltPointSix) {
  // 3x3x1: |pred=1| = 4, |gt=1| = 6, overlap 3 -> 2*3/10.
  const LabelMap pred({3, 3, 1}, {1, 1, 1, 1, 0, 0, 0, 0, 0}, 2);
  const LabelMap gt({3, 3, 1}, {0, 1, 1, 1, 1, 1, 1, 0, 0}, 2);
  const auto d = dice_per_class(pred, gt);
  EXPECT_EQ(d.values[1], 0.6);
  EXPECT_EQ(d.values[1], testing::dice_counting(pred, gt)[1]);
}

TEST(Dice, EqualsCountingOracleOnRandomMaps) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto pred = testing::random_labels({8, 8, 8}, 10, 2 * s);
    const auto gt = testing::random_labels({8, 8, 8}, 10, 2 * s + 1);
    EXPECT_EQ(dice_per_class(pred, gt).values, testing::dice_counting(pred, gt));
  }
}

TEST(Dice, Symmetric) {
  const auto a = testing::random_labels({7, 5, 3}, 5, 1);
  const auto b = testing::random_labels({7, 5, 3}, 5, 2);
  EXPECT_EQ(dice_per_class(a, b).values, dice_per_class(b, a).values);
}

TEST(Dice, PermutationInvariant) {
  const int c = 6;
  const auto a = testing::random_labels({6, 6, 6}, c, 3);
  const auto b = testing::random_labels({6, 6, 6}, c, 4);
  const std::vector<std::uint16_t> perm = {3, 5, 0, 1, 4, 2};
  auto relabel = [&](const LabelMap& m) {
    std::vector<std::uint16_t> v(m.labels().begin(), m.labels().end());
    for (auto& x : v) x = perm[x];
    return LabelMap(m.dims(), v, c);
  };
  const auto before = dice_per_class(a, b).values;
  const auto after = dice_per_class(relabel(a), relabel(b)).values;
  for (int k = 0; k < c; ++k) EXPECT_EQ(after[perm[std::size_t(k)]], before[std::size_t(k)]);
}

TEST(Dice, MismatchesRejected) {
  const auto a = testing::random_labels({4, 4, 4}, 3, 1);
  EXPECT_THROW(dice_per_class(a, testing::random_labels({4, 4, 5}, 3, 1)), Error);
  EXPECT_THROW(dice_per_class(a, LabelMap(a.dims(), std::vector<std::uint16_t>(a.labels().begin(), a.labels().end()), 4)),
               Error);
}

TEST(Dice, MeanForegroundSkipsBackground) {
  DiceVector d;
  d.values = {0.0, 0.5, 1.0};
  d.flags.assign(3, DiceFlag::kNormal);
  EXPECT_EQ(d.mean_foreground(), 0.75);
}

TEST(RobustnessMatrix, CompletenessAndLookup) {
  RobustnessMatrix m({"A", "B"}, {"t2norm", "gaus1"}, 2);
  EXPECT_FALSE(m.complete());
  MatrixCell cell;
  cell.mean = {0.9, 0.7};
  m.set(0, 0, cell);
  m.set(0, 1, cell);
  m.set(1, 0, cell);
  EXPECT_FALSE(m.complete());
  m.mark_skipped(1, 1);
  EXPECT_TRUE(m.complete());
  EXPECT_EQ(m.at("A", "gaus1").mean[1], 0.7);
  EXPECT_TRUE(m.at("B", "gaus1").skipped);
  EXPECT_THROW(m.model_index("C"), Error);
}

TEST(RobustnessMatrix, AppendModels) {
  RobustnessMatrix a({"A"}, {"t2norm"}, 2), b({"B"}, {"t2norm"}, 2);
  MatrixCell cell;
  cell.mean = {1.0, 0.5};
  a.set(0, 0, cell);
  b.set(0, 0, cell);
  a.append_models(b);
  EXPECT_EQ(a.models(), (std::vector<std::string>{"A", "B"}));
  EXPECT_TRUE(a.complete());
  EXPECT_THROW(a.append_models(b), Error);
}

}  // namespace
}  // namespace texbias
