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

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "reeflabel/errors.h"
#include "reeflabel/rng.h"

namespace reeflabel {

std::string_view ToString(Archetype archetype) {
  switch (archetype) {
    case Archetype::kDiligent: return "diligent";
    case Archetype::kCareless: return "careless";
    case Archetype::kSpammer: return "spammer";
  }
  return "diligent";
}

Archetype ParseArchetype(std::string_view name) {
  if (name == "diligent") return Archetype::kDiligent;
  if (name == "careless") return Archetype::kCareless;
  if (name == "spammer") return Archetype::kSpammer;
  throw ConfigError(fmt::format("unknown worker archetype '{}'", name));
}

void Validate(const WorkerProfile& p) {
  auto prob = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!prob(p.class_accuracy) || !prob(p.background_detection_accuracy)) {
    throw ConfigError(fmt::format("worker '{}': accuracies must lie in [0, 1]", p.worker_id));
  }
  if (!(p.box_noise >= 0.0)) {
    throw ConfigError(fmt::format("worker '{}': box_noise must be >= 0", p.worker_id));
  }
}

WorkerProfile DiligentProfile(std::string worker_id) {
  return {std::move(worker_id), Archetype::kDiligent, 0.042, 0.95, 0.9};
}

WorkerProfile CarelessProfile(std::string worker_id) {
  return {std::move(worker_id), Archetype::kCareless, 0.09, 0.75, 0.6};
}

WorkerProfile SpammerProfile(std::string worker_id) {
  return {std::move(worker_id), Archetype::kSpammer, 0.0, 0.0, 0.0};
}

void Validate(const PopulationConfig& cfg) {
  if (cfg.size < 1) throw ConfigError("worker population needs at least one worker");
  const double sum = cfg.diligent_fraction + cfg.careless_fraction + cfg.spammer_fraction;
  if (cfg.diligent_fraction < 0 || cfg.careless_fraction < 0 || cfg.spammer_fraction < 0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("worker mix fractions must be >= 0 and sum to 1");
  }
  Validate(cfg.diligent);
  Validate(cfg.careless);
  Validate(cfg.spammer);
}

std::vector<WorkerProfile> MakePopulation(const PopulationConfig& cfg, std::uint64_t seed) {
  Validate(cfg);
  const int spammers = static_cast<int>(std::lround(cfg.spammer_fraction * cfg.size));
  const int careless = static_cast<int>(std::lround(cfg.careless_fraction * cfg.size));
  const int diligent = std::max(0, cfg.size - spammers - careless);
  std::vector<Archetype> kinds;
  kinds.insert(kinds.end(), diligent, Archetype::kDiligent);
  kinds.insert(kinds.end(), careless, Archetype::kCareless);
  kinds.insert(kinds.end(), spammers, Archetype::kSpammer);
  Rng rng(seed);
  std::shuffle(kinds.begin(), kinds.end(), rng);

  std::vector<WorkerProfile> out;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    WorkerProfile p = kinds[i] == Archetype::kDiligent   ? cfg.diligent
                      : kinds[i] == Archetype::kCareless ? cfg.careless
                                                          : cfg.spammer;
    p.archetype = kinds[i];
    p.worker_id = fmt::format("w{:03d}", i);
    out.push_back(std::move(p));
  }
  return out;
}

const HiddenObject* MatchProposal(const SubTask& subtask, const HiddenWorld& world) {
  const auto& objects = world.ObjectsOn(subtask.image_id);
  const HiddenObject* best = nullptr;
  double best_score = 0.0;
  for (const auto& o : objects) {
    const double iou = Iou(o.box, subtask.proposed_box);
    const bool centered = ContainsPoint(subtask.proposed_box, o.box.CenterX(), o.box.CenterY());
    if (iou < 0.1 && !centered) continue;
    // Prefer overlap; among centered candidates with tiny overlap, the nearer
    // center wins through the small distance bonus.
    const double dx = o.box.CenterX() - subtask.proposed_box.CenterX();
    const double dy = o.box.CenterY() - subtask.proposed_box.CenterY();
    const double score = iou + 1e-6 / (1.0 + std::hypot(dx, dy));
    if (score > best_score) {
      best_score = score;
      best = &o;
    }
  }
  return best;
}

namespace {

BBox NoisyBox(const BBox& truth, double sigma, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sw = sigma * truth.Width();
  const double sh = sigma * truth.Height();
  double e[4];
  for (double& v : e) v = normal(rng);
  BBox b{truth.x_min + sw * e[0], truth.y_min + sh * e[1], truth.x_max + sw * e[2],
         truth.y_max + sh * e[3]};
  // A UI cannot produce an inverted box; handles snap to a one-pixel minimum.
  if (b.x_max - b.x_min < 1.0) b.x_max = b.x_min + 1.0;
  if (b.y_max - b.y_min < 1.0) b.y_max = b.y_min + 1.0;
  return b;
}

std::string OtherLabel(const std::string& correct, const std::vector<std::string>& classes,
                       Rng& rng) {
  std::vector<std::string> menu;
  for (const auto& c : classes) {
    if (c != correct) menu.push_back(c);
  }
  if (!IsBackground(correct)) menu.emplace_back(kBackground);
  if (menu.empty()) return correct;
  return menu[std::uniform_int_distribution<std::size_t>(0, menu.size() - 1)(rng)];
}

SubtaskAnswer SpammerAnswer(const SubTask& st, const std::vector<std::string>& classes,
                            Rng& rng) {
  const auto& v = st.crop_viewport;
  auto coord = [&](double lo, double hi) {
    double a = lo + Uniform01(rng) * (hi - lo);
    double b = lo + Uniform01(rng) * (hi - lo);
    if (a > b) std::swap(a, b);
    if (b - a < 1e-6) b = std::min(hi, a + 1.0);
    return std::pair{a, b};
  };
  const auto [x0, x1] = coord(v.x_min, v.x_max);
  const auto [y0, y1] = coord(v.y_min, v.y_max);
  const std::size_t k =
      std::uniform_int_distribution<std::size_t>(0, classes.size())(rng);
  return {BBox{x0, y0, x1, y1}, k == classes.size() ? std::string(kBackground) : classes[k]};
}

}  // namespace

WorkerAnswer AnswerHit(const WorkerProfile& profile, const Hit& hit, const HiddenWorld& world,
                       const std::vector<std::string>& classes, std::uint64_t seed) {
  WorkerAnswer answer;
  for (std::size_t i = 0; i < hit.subtasks.size(); ++i) {
    const auto& st = hit.subtasks[i];
    if (!world.HasImage(st.image_id)) {
      throw IntegrityError(fmt::format("subtask {} of {} references image '{}' outside the "
                                       "hidden world",
                                       i, hit.hit_id, st.image_id));
    }
    Rng rng(DeriveSeed(DeriveSeed(seed, hit.hit_id), static_cast<std::uint64_t>(i)));
    if (profile.archetype == Archetype::kSpammer) {
      answer.answers.push_back(SpammerAnswer(st, classes, rng));
      continue;
    }
    const HiddenObject* obj = MatchProposal(st, world);
    if (obj) {
      const BBox box = NoisyBox(obj->box, profile.box_noise, rng);
      const bool right = Uniform01(rng) < profile.class_accuracy;
      answer.answers.push_back(
          {box, right ? obj->class_label : OtherLabel(obj->class_label, classes, rng)});
    } else {
      const bool spotted = Uniform01(rng) < profile.background_detection_accuracy;
      answer.answers.push_back(
          {st.proposed_box, spotted ? std::string(kBackground) : st.proposed_class});
    }
  }
  return answer;
}

}  // namespace reeflabel
