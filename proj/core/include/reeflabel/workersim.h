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
#include <string>
#include <vector>

#include "reeflabel/crowdgate.h"
#include "reeflabel/detector.h"

namespace reeflabel {

enum class Archetype { kDiligent, kCareless, kSpammer };
std::string_view ToString(Archetype archetype);
Archetype ParseArchetype(std::string_view name);

struct WorkerProfile {
  std::string worker_id;
  Archetype archetype = Archetype::kDiligent;
  // Std-dev of each edge's displacement, as a fraction of the object side.
  double box_noise = 0.042;
  double class_accuracy = 0.95;
  double background_detection_accuracy = 0.9;
};

// Throws ConfigError when a probability is out of [0, 1] or noise < 0.
void Validate(const WorkerProfile& profile);

WorkerProfile DiligentProfile(std::string worker_id);
WorkerProfile CarelessProfile(std::string worker_id);
WorkerProfile SpammerProfile(std::string worker_id);

struct PopulationConfig {
  int size = 30;
  double diligent_fraction = 0.7;
  double careless_fraction = 0.2;
  double spammer_fraction = 0.1;
  WorkerProfile diligent = DiligentProfile("");
  WorkerProfile careless = CarelessProfile("");
  WorkerProfile spammer = SpammerProfile("");
};

void Validate(const PopulationConfig& cfg);

// Deterministic population: counts per archetype are the rounded fractions
// (remainder to diligent), ids are `w000`, `w001`, ... and the archetype
// order is shuffled with `seed`.
std::vector<WorkerProfile> MakePopulation(const PopulationConfig& cfg, std::uint64_t seed);

// Answers all subtasks of `hit` using only the HIT contents and the hidden
// world. A subtask is matched to the hidden object overlapping its proposal
// most (IoU >= 0.1, or the object center inside the proposal); unmatched
// subtasks are false positives. `classes` is the class menu offered to the
// worker (Background is always available). Throws IntegrityError when a
// subtask references an image the world does not know.
WorkerAnswer AnswerHit(const WorkerProfile& profile, const Hit& hit, const HiddenWorld& world,
                       const std::vector<std::string>& classes, std::uint64_t seed);

// The hidden object a subtask proposal refers to, or nullptr.
const HiddenObject* MatchProposal(const SubTask& subtask, const HiddenWorld& world);

}  // namespace reeflabel
