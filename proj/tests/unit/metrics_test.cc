// Copyright 2026 The Reeflabel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "reeflabel/metrics.h"

#include <algorithm>
#include <random>

#include <gtest/gtest.h>

namespace reeflabel {
namespace {

// AP straight from the definition: the area under the precision envelope,
// p_interp(r) = max precision at any cut-off reaching recall >= r.
double ReferenceAp(const std::vector<bool>& ranked, int truths) {
  std::vector<std::pair<double, double>> points;  // (recall, precision) per cut-off
  int tp = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    tp += ranked[k];
    points.push_back({static_cast<double>(tp) / truths, static_cast<double>(tp) / (k + 1)});
  }
  std::vector<double> recalls = {0.0};
  for (const auto& [r, _] : points) recalls.push_back(r);
  std::sort(recalls.begin(), recalls.end());
  recalls.erase(std::unique(recalls.begin(), recalls.end()), recalls.end());
  double ap = 0.0;
  for (std::size_t i = 1; i < recalls.size(); ++i) {
    double best = 0.0;
    for (const auto& [r, p] : points) {
      if (r >= recalls[i]) best = std::max(best, p);
    }
    ap += (recalls[i] - recalls[i - 1]) * best;
  }
  return ap;
}

TEST(AveragePrecisionTest, HandExamples) {
  EXPECT_DOUBLE_EQ(AveragePrecisionFromRanks({true}, 1), 1.0);
  EXPECT_NEAR(AveragePrecisionFromRanks({true, false, true}, 2), 5.0 / 6.0, 1e-12);
  EXPECT_EQ(AveragePrecisionFromRanks({false, false}, 3), 0.0);
  EXPECT_EQ(AveragePrecisionFromRanks({}, 3), 0.0);
}

TEST(AveragePrecisionTest, MatchesDefinitionOnRandomRankings) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    std::vector<bool> ranked(n);
    int tps = 0;
    for (int i = 0; i < n; ++i) tps += ranked[i] = std::bernoulli_distribution(0.5)(rng);
    const int truths = tps + std::uniform_int_distribution<int>(0, 5)(rng);
    if (truths == 0) continue;
    EXPECT_NEAR(AveragePrecisionFromRanks(ranked, truths), ReferenceAp(ranked, truths), 1e-12);
  }
}

TEST(EvaluateTest, GreedyMatchingAndPrecision) {
  DetectionsByImage dets;
  dets["a"] = {{{0, 0, 10, 10}, "Sponge", 0.9, ""},
               {{0, 0, 10, 10}, "Sponge", 0.8, ""},   // duplicate: FP
               {{50, 50, 60, 60}, "Sponge", 0.7, ""},
               {{0, 0, 10, 10}, "Rockfish", 0.4, ""}};  // below threshold, wrong class
  TruthsByImage truths;
  truths["a"] = {{{0, 0, 10, 10}, "Sponge"}, {{50, 50, 60, 60}, "Sponge"}};
  const auto ev = Evaluate(dets, truths, {"Sponge", "Rockfish"});
  const auto& s = ev.classes.at("Sponge");
  EXPECT_EQ(s.truths, 2);
  EXPECT_EQ(s.published, 3);
  EXPECT_EQ(s.published_true, 2);
  EXPECT_NEAR(*s.precision, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(*s.ap, 5.0 / 6.0, 1e-12);
  // Rockfish has no truths: no AP, and it stays out of the mean.
  EXPECT_FALSE(ev.classes.at("Rockfish").ap);
  EXPECT_FALSE(ev.classes.at("Rockfish").precision);
  EXPECT_NEAR(*ev.map, 5.0 / 6.0, 1e-12);
}

TEST(EvaluateTest, IouThresholdIsInclusive) {
  DetectionsByImage dets;
  dets["a"] = {{{0, 0, 10, 10}, "Sponge", 0.9, ""}};
  TruthsByImage truths;
  truths["a"] = {{{0, 0, 20, 10}, "Sponge"}};  // IoU exactly 0.5
  EXPECT_DOUBLE_EQ(*Evaluate(dets, truths, {"Sponge"}).classes.at("Sponge").ap, 1.0);
}

TEST(HasConvergedTest, Examples) {
  EXPECT_FALSE(HasConverged({0.30}, 0.01, 1));
  EXPECT_FALSE(HasConverged({0.30, 0.02}, 0.01, 1));
  EXPECT_TRUE(HasConverged({0.30, 0.02, 0.004}, 0.01, 1));
  EXPECT_FALSE(HasConverged({0.5, 0.4, 0.3}, 0.01, 1));
  EXPECT_FALSE(HasConverged({0.004, 0.3, 0.004}, 0.01, 2));
  EXPECT_TRUE(HasConverged({0.3, 0.004, 0.004}, 0.01, 2));
  EXPECT_FALSE(HasConverged({}, 0.01, 1));
}

}  // namespace
}  // namespace reeflabel
