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
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "reeflabel/config.h"
#include "reeflabel/detector.h"

namespace reeflabel {

// Everything a simulated run starts from. `world` stays private to the
// simulators and the evaluator; the store only ever sees `seed_boxes`, the
// public image list and `dots_csv`.
struct Scenario {
  HiddenWorld world;
  nlohmann::json seed_boxes;
  std::string dots_csv;
  // Pool objects deliberately left without a dot (LegacyDots only).
  std::set<std::string> undotted;
};

// Random non-overlapping objects on `cfg.images` images; the first
// `cfg.seed_images` images form the fully boxed seed split.
HiddenWorld GenerateWorld(const ScenarioConfig& cfg, std::uint64_t seed);

// Dot file (`image_id,x,y,class_label`) with one dot at the center of every
// pool object except a random `undotted_fraction` of them.
std::string MakeDots(const HiddenWorld& world, double undotted_fraction, std::uint64_t seed,
                     std::set<std::string>* undotted);

Scenario GenerateScenario(const RunConfig& cfg);

// Loads the [data] files of `cfg`, or generates a scenario when no hidden
// world is configured.
Scenario PrepareScenario(const RunConfig& cfg);

// Writes hidden_world.json, seed.json, dots.csv and undotted.json into `dir`.
void WriteScenario(const Scenario& scenario, const std::filesystem::path& dir);
Scenario ReadScenario(const std::filesystem::path& dir);

}  // namespace reeflabel
