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

#include "reeflabel/orchestrator.h"

#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "reeflabel/errors.h"
#include "test_support.h"

namespace reeflabel {
namespace {

RunConfig SmallRun(RunMode mode = RunMode::kFromSeed) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.seed = 3;
  cfg.max_loops = 3;
  cfg.stop_on_convergence = false;
  cfg.scenario.images = 40;
  cfg.scenario.seed_images = 10;
  cfg.workers.size = 10;
  if (mode == RunMode::kLegacyDots) cfg.publish_threshold = 0.3;
  return cfg;
}

int RunRecords(const LabelStore& store, const std::string& kind, int loop) {
  int n = 0;
  for (const auto& e : store.Events()) {
    const auto* r = std::get_if<RunRecord>(&e.body);
    if (r && r->kind == kind && r->data.value("loop", -1) == loop) ++n;
  }
  return n;
}

TEST(OrchestratorTest, LoopsGrowLabelsMonotonically) {
  const auto cfg = SmallRun();
  const auto scenario = GenerateScenario(cfg);
  LabelStore store;
  Orchestrator orch(cfg, scenario, store);
  const auto reports = orch.Run();
  ASSERT_EQ(reports.size(), 3u);
  for (const auto& cls : reports[0].class_order) {
    EXPECT_GT(reports[0].classes.at(cls).delta, 0) << cls;
    EXPECT_EQ(reports[0].classes.at(cls).delta, reports[0].classes.at(cls).labels);
  }
  for (std::size_t i = 1; i < reports.size(); ++i) {
    for (const auto& cls : reports[i].class_order) {
      const auto& now = reports[i].classes.at(cls);
      const auto& before = reports[i - 1].classes.at(cls);
      EXPECT_GE(now.labels, before.labels);
      EXPECT_EQ(now.delta, now.labels - before.labels);
    }
    EXPECT_EQ(reports[i].background_delta, reports[i].background - reports[i - 1].background);
    EXPECT_GE(reports[i].pool_coverage, reports[i - 1].pool_coverage);
  }
  EXPECT_EQ(RunRecords(store, "training", 0), 1);
}

TEST(OrchestratorTest, ReplayReproducesReports) {
  const auto cfg = SmallRun();
  const auto scenario = GenerateScenario(cfg);
  LabelStore store;
  Orchestrator orch(cfg, scenario, store);
  const auto live = orch.Run();
  const auto replayed = ReplayReports(store.Events(), scenario.world, scenario.undotted);
  ASSERT_EQ(replayed.size(), live.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    EXPECT_EQ(replayed[i].ToJson().dump(), live[i].ToJson().dump());
    EXPECT_EQ(replayed[i].ToCsv(), live[i].ToCsv());
  }
}

TEST(OrchestratorTest, SameSeedSameRun) {
  const auto cfg = SmallRun();
  const auto a = RunInMemory(cfg, GenerateScenario(cfg));
  const auto b = RunInMemory(cfg, GenerateScenario(cfg));
  EXPECT_EQ(SummaryCsv(a), SummaryCsv(b));
}

TEST(OrchestratorTest, NoPredictionsMeansZeroDeltas) {
  auto cfg = SmallRun();
  cfg.max_loops = 1;
  cfg.detector.p_min = cfg.detector.p_max = 0.0;
  cfg.detector.fp_rate0 = 0.0;
  const auto reports = RunInMemory(cfg, GenerateScenario(cfg));
  ASSERT_EQ(reports.size(), 1u);
  for (const auto& [_, row] : reports[0].classes) EXPECT_EQ(row.delta, 0);
  EXPECT_EQ(reports[0].background_delta, 0);
  EXPECT_EQ(reports[0].new_labels, 0);
}

TEST(OrchestratorTest, LegacyDotsSkipsInitialTraining) {
  const auto cfg = SmallRun(RunMode::kLegacyDots);
  const auto scenario = GenerateScenario(cfg);
  LabelStore store;
  Orchestrator orch(cfg, scenario, store);
  orch.Initialize();
  EXPECT_EQ(RunRecords(store, "training", 0), 0);
  const auto r = orch.RunLoop();
  EXPECT_EQ(RunRecords(store, "training", 1), 1);
  EXPECT_EQ(RunRecords(store, "detections", 1), 0);  // dots are the first predictions
  ASSERT_TRUE(r.undotted_recovery.has_value());
}

TEST(OrchestratorTest, FailedLoopLeavesStoreAtPreviousSnapshot) {
  auto cfg = SmallRun(RunMode::kLegacyDots);
  cfg.trainer.divergence_limit = 1e-9;  // first training step inside the loop blows up
  const auto scenario = GenerateScenario(cfg);
  LabelStore store;
  Orchestrator orch(cfg, scenario, store);
  orch.Initialize();
  const auto events = store.Events().size();
  const auto before = store.Snapshot().annotations();
  EXPECT_THROW(orch.RunLoop(), NumericError);
  EXPECT_EQ(store.Events().size(), events);
  EXPECT_EQ(store.Snapshot().annotations(), before);
  EXPECT_EQ(orch.loop(), 0);
}

TEST(OrchestratorTest, ConvergenceStopsTheRun) {
  auto cfg = SmallRun();
  cfg.max_loops = 10;
  cfg.stop_on_convergence = true;
  cfg.epsilon = 0.5;  // any loop adding fewer than half the labels stops the run
  const auto scenario = GenerateScenario(cfg);
  LabelStore store;
  Orchestrator orch(cfg, scenario, store);
  const auto reports = orch.Run();
  EXPECT_TRUE(orch.converged());
  EXPECT_LT(reports.size(), 10u);
  EXPECT_LT(reports.back().new_label_delta_ratio, 0.5);
}

TEST(AblationTest, BackgroundLabelsOnlyReachTheOnArm) {
  auto cfg = SmallRun();
  cfg.max_loops = 3;
  const auto result = PrecisionAblation(cfg, {4});
  ASSERT_EQ(result.seeds.size(), 1u);
  const auto& s = result.seeds[0];
  int on_max = 0;
  for (const auto& r : s.reports_on) on_max = std::max(on_max, r.background_labels_in_training);
  for (const auto& r : s.reports_off) EXPECT_EQ(r.background_labels_in_training, 0);
  EXPECT_GT(on_max, 0);
  const auto j = result.ToJson();
  EXPECT_EQ(j["seeds"].size(), 1u);
}

TEST(AblationTest, NoDecayMeansNoDifference) {
  auto cfg = SmallRun();
  cfg.detector.fp_decay_beta = 0.0;
  const auto result = PrecisionAblation(cfg, {4, 5});
  for (const auto& s : result.seeds) {
    EXPECT_EQ(s.precision_on, s.precision_off) << "seed " << s.seed;
  }
}

TEST(RunSimulationTest, WritesArtifactsAndRefusesReuse) {
  testing::TempDir dir;
  auto cfg = SmallRun();
  cfg.max_loops = 2;
  const auto out = RunSimulation(cfg, dir.path() / "run");
  for (const char* f : {"manifest.json", "reports/loop_1.json", "reports/loop_2.csv",
                        "reports/summary.csv", "reports/loss_loop_1.csv",
                        "store/events.jsonl", "data/hidden_world.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out.output_dir / f)) << f;
  }
  std::ifstream csv(out.output_dir / "reports/loss_loop_1.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, "epoch,loss,cls_i,cls_j,cls_k,reg");
  EXPECT_THROW(RunSimulation(cfg, dir.path() / "run"), StateError);

  EXPECT_TRUE(VerifyRun(out.output_dir).mismatches.empty());
  std::ofstream(out.output_dir / "reports/loop_2.csv", std::ios::app) << "x";
  EXPECT_EQ(VerifyRun(out.output_dir).mismatches,
            std::vector<std::string>{"reports/loop_2.csv"});
}

TEST(SummaryTableTest, ShapedLikeTheLoopTable) {
  auto cfg = SmallRun();
  cfg.max_loops = 2;
  const auto reports = RunInMemory(cfg, GenerateScenario(cfg));
  const auto table = SummaryTable(reports);
  std::istringstream lines(table);
  std::string header;
  std::getline(lines, header);
  for (const char* col : {"Rockfish", "Starfish", "Sponge", "Background", "mAP/50"}) {
    EXPECT_NE(header.find(col), std::string::npos) << col;
  }
  EXPECT_LT(header.find("Rockfish"), header.find("Sponge"));
  EXPECT_NE(table.find("(+"), std::string::npos);
}

}  // namespace
}  // namespace reeflabel
