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

#include "reeflabel/scenario.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "reeflabel/errors.h"
#include "reeflabel/rng.h"

namespace reeflabel {

using nlohmann::json;

HiddenWorld GenerateWorld(const ScenarioConfig& cfg, std::uint64_t seed) {
  HiddenWorld world;
  for (const auto& c : cfg.classes) world.AddClass(c);
  std::discrete_distribution<std::size_t> pick_class(cfg.class_weights.begin(),
                                                     cfg.class_weights.end());
  int next_object = 0;
  for (int i = 0; i < cfg.images; ++i) {
    ImageRecord im;
    im.image_id = fmt::format("img-{:05d}", i);
    im.width = cfg.width;
    im.height = cfg.height;
    im.uri = fmt::format("images/{}.jpg", im.image_id);
    im.split = i < cfg.seed_images ? Split::kSeed : Split::kPool;
    world.AddImage(im);

    Rng rng(DeriveSeed(seed, im.image_id));
    const int target =
        std::uniform_int_distribution<int>(cfg.objects_min, cfg.objects_max)(rng);
    std::vector<BBox> placed;
    for (int attempt = 0; static_cast<int>(placed.size()) < target && attempt < 200 * (target + 1);
         ++attempt) {
      const double side = cfg.min_size + Uniform01(rng) * (cfg.max_size - cfg.min_size);
      const double aspect = std::exp((Uniform01(rng) - 0.5) * 0.7);  // ~[0.7, 1.42]
      const double w = std::min(side * std::sqrt(aspect), cfg.width);
      const double h = std::min(side / std::sqrt(aspect), cfg.height);
      const double x = std::round(Uniform01(rng) * (cfg.width - w));
      const double y = std::round(Uniform01(rng) * (cfg.height - h));
      const BBox box{x, y, x + std::round(w), y + std::round(h)};
      if (!box.IsValid() || box.x_max > cfg.width || box.y_max > cfg.height) continue;
      const bool clash = std::any_of(placed.begin(), placed.end(), [&](const BBox& p) {
        return Iou(p, box) > cfg.max_overlap_iou ||
               ContainsPoint(p, box.CenterX(), box.CenterY()) ||
               ContainsPoint(box, p.CenterX(), p.CenterY());
      });
      if (clash) continue;
      placed.push_back(box);
      world.AddObject({fmt::format("obj-{:06d}", next_object++), im.image_id, box,
                       cfg.classes[pick_class(rng)]});
    }
  }
  return world;
}

std::string MakeDots(const HiddenWorld& world, double undotted_fraction, std::uint64_t seed,
                     std::set<std::string>* undotted) {
  std::vector<const HiddenObject*> pool;
  for (const auto& [id, im] : world.images()) {
    if (im.split != Split::kPool) continue;
    for (const auto& o : world.ObjectsOn(id)) pool.push_back(&o);
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto drop = static_cast<std::size_t>(
      std::llround(undotted_fraction * static_cast<double>(pool.size())));
  std::set<std::size_t> dropped(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(drop));

  std::string csv = "image_id,x,y,class_label\n";
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto* o = pool[i];
    if (dropped.count(i)) {
      if (undotted) undotted->insert(o->object_id);
      continue;
    }
    csv += fmt::format("{},{},{},{}\n", o->image_id, o->box.CenterX(), o->box.CenterY(),
                       o->class_label);
  }
  return csv;
}

Scenario GenerateScenario(const RunConfig& cfg) {
  Scenario s;
  s.world = GenerateWorld(cfg.scenario, DeriveSeed(cfg.seed, "world"));
  s.seed_boxes = s.world.BoxesDocument(Split::kSeed);
  if (cfg.mode == RunMode::kLegacyDots) {
    s.dots_csv = MakeDots(s.world, cfg.scenario.undotted_fraction, DeriveSeed(cfg.seed, "dots"),
                          &s.undotted);
  }
  return s;
}

namespace {

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json ReadJson(const std::filesystem::path& path) {
  try {
    return json::parse(ReadText(path));
  } catch (const json::parse_error& e) {
    throw ImportError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StateError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

}  // namespace

Scenario PrepareScenario(const RunConfig& cfg) {
  if (cfg.hidden_world.empty()) return GenerateScenario(cfg);
  Scenario s;
  s.world = HiddenWorld::Load(cfg.hidden_world);
  s.seed_boxes = cfg.seed_boxes.empty() ? s.world.BoxesDocument(Split::kSeed)
                                        : ReadJson(cfg.seed_boxes);
  if (cfg.mode == RunMode::kLegacyDots) {
    if (cfg.dots.empty()) throw ConfigError("legacy_dots mode needs [data] dots");
    s.dots_csv = ReadText(cfg.dots);
  }
  return s;
}

void WriteScenario(const Scenario& scenario, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteText(dir / "hidden_world.json", scenario.world.ToJson().dump(1) + "\n");
  WriteText(dir / "seed.json", SerializeBoxes(scenario.seed_boxes));
  WriteText(dir / "dots.csv", scenario.dots_csv);
  WriteText(dir / "undotted.json", json(scenario.undotted).dump() + "\n");
}

Scenario ReadScenario(const std::filesystem::path& dir) {
  Scenario s;
  s.world = HiddenWorld::Load(dir / "hidden_world.json");
  s.seed_boxes = ReadJson(dir / "seed.json");
  if (std::filesystem::exists(dir / "dots.csv")) s.dots_csv = ReadText(dir / "dots.csv");
  if (std::filesystem::exists(dir / "undotted.json")) {
    s.undotted = ReadJson(dir / "undotted.json").get<std::set<std::string>>();
  }
  return s;
}

}  // namespace reeflabel
