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
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "reeflabel/crowdgate.h"
#include "reeflabel/detector.h"
#include "reeflabel/trainer.h"
#include "reeflabel/workersim.h"

namespace reeflabel {

// Parses the TOML subset used by run configs into nested JSON objects:
// `[table]` and `[table.sub]` headers, `key = value` pairs, `#` comments,
// basic strings, integers, floats, booleans and single-line arrays of those.
// Throws ConfigError naming the line on malformed input or duplicate keys.
nlohmann::json ParseToml(std::string_view text);

enum class RunMode { kFromSeed, kLegacyDots };
std::string_view ToString(RunMode mode);
RunMode ParseRunMode(std::string_view name);

// Synthetic hidden world used when no dataset files are given.
struct ScenarioConfig {
  int images = 200;
  double width = 640.0;
  double height = 480.0;
  std::vector<std::string> classes = {"Rockfish", "Starfish", "Sponge"};
  // Relative class frequencies (normalized internally).
  std::vector<double> class_weights = {965.0, 650.0, 2005.0};
  int objects_min = 7;
  int objects_max = 13;
  double min_size = 40.0;
  double max_size = 120.0;
  // Objects are placed so that no two overlap beyond this IoU.
  double max_overlap_iou = 0.1;
  // Fully boxed expert images; the remainder forms the unlabeled pool.
  int seed_images = 40;
  // LegacyDots: fraction of pool objects left without a dot.
  double undotted_fraction = 0.05;
};

struct RunConfig {
  std::uint64_t seed = 1;
  RunMode mode = RunMode::kFromSeed;
  int max_loops = 10;
  double epsilon = 0.01;
  int patience = 1;
  // Stop as soon as the convergence rule fires (false: always run max_loops).
  bool stop_on_convergence = true;
  double publish_threshold = 0.5;
  double dedup_iou = 0.5;
  int train_epochs = 2;
  bool background_training = true;
  // Crowd rounds per loop; each round offers one HIT to every worker.
  int max_rounds = 400;
  double seed_half_extent = kDefaultSeedHalfExtent;
  double feature_noise = 0.05;
  std::string output_dir = "out";

  // Dataset files. Empty hidden_world means "generate from [scenario]".
  std::string hidden_world;
  std::string seed_boxes;
  std::string dots;

  ScenarioConfig scenario;
  CrowdConfig crowd;
  TrainConfig trainer;
  SimDetectorConfig detector;
  PopulationConfig workers;
};

// Binds a parsed document onto the defaults. Unknown tables or keys and
// wrongly typed values are ConfigErrors. Relative data paths are resolved
// against `base_dir` when given.
RunConfig RunConfigFromJson(const nlohmann::json& doc,
                            const std::filesystem::path& base_dir = {});
RunConfig LoadRunConfig(const std::filesystem::path& path);
RunConfig ParseRunConfig(std::string_view toml_text);

// Fully resolved configuration, every key present.
nlohmann::json RunConfigToJson(const RunConfig& cfg);

// Stable 16-hex-digit digest of the resolved configuration.
std::string ConfigHash(const RunConfig& cfg);

void Validate(const RunConfig& cfg);

}  // namespace reeflabel
