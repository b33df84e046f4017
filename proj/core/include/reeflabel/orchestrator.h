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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reeflabel/config.h"
#include "reeflabel/detector.h"
#include "reeflabel/labelstore.h"
#include "reeflabel/metrics.h"
#include "reeflabel/scenario.h"
#include "reeflabel/trainer.h"
#include "reeflabel/workersim.h"

namespace reeflabel {

struct ClassRow {
  int labels = 0;  // crowd-approved labels; seed boxes are counted separately
  int delta = 0;
  int seed = 0;
  int hidden_total = 0;
  int published = 0;       // detections at or above the publish threshold
  int published_true = 0;  // of which matched a hidden object
  std::optional<double> precision;
  std::optional<double> ap50;
};

struct CrowdStats {
  int hits_approved = 0;
  int hits_rejected = 0;
  int stale_submissions = 0;
  int reviews = 0;
  int finalized = 0;
  int republished = 0;
  int rejected_annotations = 0;
  int max_publish_count = 0;
  int still_pending = 0;
};

struct LoopReport {
  int loop = 0;
  std::string mode;
  std::string config_hash;
  std::map<std::string, ClassRow> classes;
  // Catalog order, used for table columns.
  std::vector<std::string> class_order;
  int background = 0;
  int background_delta = 0;
  std::optional<double> map50;
  int new_labels = 0;
  double new_label_delta_ratio = 0.0;
  // Fraction of hidden pool objects covered by an Approved label of the right
  // class at IoU >= 0.5.
  double pool_coverage = 0.0;
  // Same over every hidden object, counting Seed labels too.
  double hidden_coverage = 0.0;
  // LegacyDots: fraction of un-dotted objects covered by an Approved label.
  std::optional<double> undotted_recovery;
  int detections = 0;
  int published = 0;
  int background_labels_in_training = 0;
  std::optional<double> final_training_loss;
  CrowdStats crowd;

  nlohmann::json ToJson() const;
  // One row per class plus Background and mAP rows.
  std::string ToCsv() const;
};

// Consumes store events in order and emits one LoopReport whenever a loop
// completes. Live runs and event-log replays both report through this class.
class ReportBuilder {
 public:
  ReportBuilder(const HiddenWorld& world, std::set<std::string> undotted = {});

  void Consume(const Event& event);
  void ConsumeAll(const std::vector<Event>& events);

  const std::vector<LoopReport>& reports() const { return reports_; }
  const Dataset& dataset() const { return dataset_; }

 private:
  LoopReport Build(int loop) const;

  const HiddenWorld& world_;
  std::set<std::string> undotted_;
  Dataset dataset_;
  std::string config_hash_;
  std::string mode_;
  double publish_threshold_ = 0.5;
  int loop_ = 0;
  int approved_at_start_ = 0;
  std::optional<DetectionsByImage> detections_;
  nlohmann::json training_;
  CrowdStats crowd_;
  std::vector<LoopReport> reports_;
};

std::vector<LoopReport> ReplayReports(const std::vector<Event>& events, const HiddenWorld& world,
                                      const std::set<std::string>& undotted = {});

// Drives detect -> filter -> publish -> crowd -> consensus -> train loops
// against a label store, using the simulated detector and workers.
class Orchestrator {
 public:
  Orchestrator(RunConfig cfg, const Scenario& scenario, LabelStore& store);

  // Logs the run header, imports the public images, seed boxes and (for
  // LegacyDots) dots, then trains the loop-0 model (FromSeed only).
  void Initialize();

  // One full loop, committed atomically. Returns its report.
  LoopReport RunLoop();

  // Initialize (if needed) and loop until convergence or max_loops.
  std::vector<LoopReport> Run();

  const std::vector<LoopReport>& reports() const { return builder_.reports(); }
  bool converged() const;
  int loop() const { return loop_; }
  const ScoringModel& model() const { return *model_; }

 private:
  std::unique_ptr<LinearLogisticModel> Train(Transaction& tx, int loop) const;
  void CrowdPhase(Transaction& tx, int loop);
  void Feed();

  RunConfig cfg_;
  const Scenario& scenario_;
  LabelStore& store_;
  std::string config_hash_;
  std::vector<WorkerProfile> workers_;
  std::unique_ptr<LinearLogisticModel> model_;
  SimFeatureSource features_;
  SimulatedDetector detector_;
  ReportBuilder builder_;
  std::uint64_t fed_seq_ = 0;
  bool initialized_ = false;
  int loop_ = 0;
  TimestampMs clock_ = 0;
};

struct RunOutcome {
  std::vector<LoopReport> reports;
  bool converged = false;
  std::filesystem::path output_dir;
};

// Full simulated run with artifacts: data/ (scenario files), store/
// (event log and snapshot), reports/loop_<n>.json|csv, reports/summary.csv,
// reports/loss_loop_<n>.csv and manifest.json. Refuses a non-empty store.
RunOutcome RunSimulation(const RunConfig& cfg, const std::filesystem::path& output_dir);

// Report files of a run keyed by path relative to the run directory:
// reports/loop_<n>.json, reports/loop_<n>.csv and reports/summary.csv.
std::map<std::string, std::string> ReportFiles(const std::vector<LoopReport>& reports);

struct RunVerification {
  std::vector<LoopReport> reports;      // replayed from the event log
  std::vector<std::string> mismatches;  // report files that differ or are missing
};

// Replays <run_dir>/store/events.jsonl over <run_dir>/data and compares the
// regenerated report files byte for byte with the ones on disk.
RunVerification VerifyRun(const std::filesystem::path& run_dir);

// In-memory run without artifacts.
std::vector<LoopReport> RunInMemory(const RunConfig& cfg, const Scenario& scenario);

// Consolidated per-loop table: loop, per-class labels(+delta), Background,
// mAP/50.
std::string SummaryTable(const std::vector<LoopReport>& reports);
std::string SummaryCsv(const std::vector<LoopReport>& reports);

struct AblationSeedResult {
  std::uint64_t seed = 0;
  // Per-class precision of published detections pooled over loops >= 2.
  std::map<std::string, double> precision_on;
  std::map<std::string, double> precision_off;
  std::vector<LoopReport> reports_on;
  std::vector<LoopReport> reports_off;
  bool on_at_least_off = false;  // for every class
};

struct AblationResult {
  std::vector<AblationSeedResult> seeds;
  int seeds_on_at_least_off = 0;
  nlohmann::json ToJson() const;
};

// Paired runs (background training on vs off) over the same generated
// scenario and worker streams for each seed. Convergence stopping is disabled
// so both arms run `cfg.max_loops` loops.
AblationResult PrecisionAblation(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds);

}  // namespace reeflabel
