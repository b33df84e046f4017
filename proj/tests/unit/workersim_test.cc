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

#include "reeflabel/workersim.h"

#include <cmath>

#include <gtest/gtest.h>

#include "reeflabel/errors.h"
#include "world_support.h"

namespace reeflabel {
namespace {

class WorkerSimTest : public ::testing::Test {
 protected:
  void SetUp() override {
    world_ = testing::SmallWorld(120, 21);
    gold_ = testing::GoldFromWorld(world_);
    index_ = testing::GoldIndex(gold_);
  }

  // HITs whose real work is the true objects themselves.
  std::vector<Hit> Hits(std::size_t max_hits, std::uint64_t seed) {
    std::vector<HitCandidate> pending;
    for (const auto& g : gold_) pending.push_back({"cand-" + g.ann_id, g.image_id, g.box,
                                                   g.class_label, g.extent});
    auto hits = AssembleHits(pending, gold_, cfg_, seed);
    if (hits.size() > max_hits) hits.resize(max_hits);
    return hits;
  }

  double ApprovalRate(const WorkerProfile& p, int hits_wanted) {
    int approved = 0, seen = 0;
    for (std::uint64_t round = 0; seen < hits_wanted; ++round) {
      for (const auto& hit : Hits(hits_wanted, DeriveSeed(31, round))) {
        if (seen == hits_wanted) break;
        const auto answer = AnswerHit(p, hit, world_, world_.classes(), DeriveSeed(7, seen));
        const auto& g = index_.at(hit.gold().ann_id);
        approved += AutoApprove(hit, answer, g.box, g.class_label, cfg_).approved;
        ++seen;
      }
    }
    return static_cast<double>(approved) / seen;
  }

  CrowdConfig cfg_;
  HiddenWorld world_;
  std::vector<GoldItem> gold_;
  std::map<std::string, GoldItem> index_;
};

TEST_F(WorkerSimTest, NoiselessDiligentReturnsTrueBoxes) {
  auto p = DiligentProfile("w");
  p.box_noise = 0.0;
  p.class_accuracy = 1.0;
  for (const auto& hit : Hits(20, 1)) {
    const auto a = AnswerHit(p, hit, world_, world_.classes(), 2);
    const auto& g = index_.at(hit.gold().ann_id);
    EXPECT_EQ(Iou(a.answers[hit.gold_position].adjusted_box, g.box), 1.0);
    EXPECT_EQ(a.answers[hit.gold_position].selected_class, g.class_label);
  }
}

TEST_F(WorkerSimTest, SpammersAlmostNeverPassGold) {
  EXPECT_LT(ApprovalRate(SpammerProfile("s"), 1000), 0.01);
}

TEST_F(WorkerSimTest, DiligentWorkersUsuallyPassGold) {
  const double rate = ApprovalRate(DiligentProfile("d"), 1000);
  EXPECT_GT(rate, 0.9);
  EXPECT_LT(rate, 0.99);
}

TEST_F(WorkerSimTest, CarelessSitsBetween) {
  const double careless = ApprovalRate(CarelessProfile("c"), 500);
  EXPECT_GT(careless, ApprovalRate(SpammerProfile("s"), 500));
  EXPECT_LT(careless, ApprovalRate(DiligentProfile("d"), 500));
}

TEST_F(WorkerSimTest, ClassAccuracyIsBinomial) {
  const auto p = DiligentProfile("d");
  int correct = 0, total = 0;
  for (const auto& hit : Hits(1000, 3)) {
    const auto a = AnswerHit(p, hit, world_, world_.classes(), DeriveSeed(4, hit.hit_id));
    for (std::size_t i = 0; i < hit.subtasks.size() && total < 1000; ++i) {
      const auto* obj = MatchProposal(hit.subtasks[i], world_);
      ASSERT_NE(obj, nullptr);
      correct += a.answers[i].selected_class == obj->class_label;
      ++total;
    }
    if (total == 1000) break;
  }
  ASSERT_EQ(total, 1000);
  const double sigma = std::sqrt(1000 * 0.95 * 0.05);
  EXPECT_NEAR(correct, 950, 3 * sigma);
}

TEST_F(WorkerSimTest, FalsePositivesAreCalledBackground) {
  // A proposal in an empty corner of a fresh image matches nothing.
  HiddenWorld w;
  w.AddClass("Rockfish");
  w.AddImage({"empty", 640, 480, "", Split::kPool});
  Hit hit;
  hit.hit_id = "h";
  for (int i = 0; i < 1000; ++i) {
    SubTask st;
    st.ann_id = "fp" + std::to_string(i);
    st.image_id = "empty";
    st.proposed_box = {10, 10, 60, 60};
    st.crop_viewport = {0, 0, 200, 200};
    st.proposed_class = "Rockfish";
    hit.subtasks.push_back(st);
  }
  const auto a = AnswerHit(DiligentProfile("d"), hit, w, w.classes(), 5);
  int bg = 0;
  for (const auto& ans : a.answers) bg += IsBackground(ans.selected_class);
  EXPECT_NEAR(bg, 900, 3 * std::sqrt(1000 * 0.9 * 0.1));
}

TEST_F(WorkerSimTest, DeterministicAndReadsOnlyTheWorld) {
  const auto hits = Hits(3, 8);
  const auto p = CarelessProfile("c");
  for (const auto& h : hits) {
    EXPECT_EQ(AnswerHit(p, h, world_, world_.classes(), 4).answers,
              AnswerHit(p, h, world_, world_.classes(), 4).answers);
  }
  Hit stray = hits[0];
  stray.subtasks[0].image_id = "not-in-world";
  EXPECT_THROW(AnswerHit(p, stray, world_, world_.classes(), 4), IntegrityError);
}

TEST(PopulationTest, MixAndIds) {
  PopulationConfig cfg;
  const auto pop = MakePopulation(cfg, 3);
  ASSERT_EQ(pop.size(), 30u);
  std::map<Archetype, int> count;
  for (const auto& w : pop) ++count[w.archetype];
  EXPECT_EQ(count[Archetype::kDiligent], 21);
  EXPECT_EQ(count[Archetype::kCareless], 6);
  EXPECT_EQ(count[Archetype::kSpammer], 3);
  EXPECT_EQ(pop.front().worker_id, "w000");
  EXPECT_EQ(pop.back().worker_id, "w029");
  const auto again = MakePopulation(cfg, 3);
  for (std::size_t i = 0; i < pop.size(); ++i) EXPECT_EQ(pop[i].archetype, again[i].archetype);
}

TEST(PopulationTest, Validation) {
  PopulationConfig cfg;
  cfg.spammer_fraction = 0.5;
  EXPECT_THROW(MakePopulation(cfg, 1), ConfigError);
  auto p = DiligentProfile("x");
  p.class_accuracy = 1.5;
  EXPECT_THROW(Validate(p), ConfigError);
  EXPECT_EQ(ParseArchetype("careless"), Archetype::kCareless);
  EXPECT_THROW(ParseArchetype("lazy"), ConfigError);
}

}  // namespace
}  // namespace reeflabel
