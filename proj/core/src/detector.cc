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

#include "reeflabel/detector.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "reeflabel/errors.h"
#include "reeflabel/rng.h"

namespace reeflabel {

using nlohmann::json;

// --- HiddenWorld ------------------------------------------------------------

HiddenWorld HiddenWorld::FromJson(const json& document) {
  if (!document.is_object() || !document.value("hidden", false)) {
    throw ImportError("hidden-world document must carry \"hidden\": true");
  }
  for (const char* key : {"images", "categories", "annotations"}) {
    if (!document.contains(key) || !document[key].is_array()) {
      throw ImportError(fmt::format("hidden world: '{}' must be an array", key));
    }
  }
  HiddenWorld world;
  std::map<std::string, std::string> names;
  for (const auto& c : document["categories"]) {
    const auto id = c["id"].is_string() ? c["id"].get<std::string>()
                                        : std::to_string(c["id"].get<std::int64_t>());
    names[id] = c.at("name").get<std::string>();
    world.AddClass(names[id]);
  }
  for (const auto& im : document["images"]) {
    ImageRecord rec;
    rec.image_id = im.at("id").get<std::string>();
    rec.width = im.at("width").get<double>();
    rec.height = im.at("height").get<double>();
    rec.uri = im.value("uri", "");
    rec.split = ParseSplit(im.value("split", "pool"));
    world.AddImage(std::move(rec));
  }
  for (std::size_t i = 0; i < document["annotations"].size(); ++i) {
    const auto& a = document["annotations"][i];
    const auto cat = a.at("category_id").is_string()
                         ? a["category_id"].get<std::string>()
                         : std::to_string(a["category_id"].get<std::int64_t>());
    auto it = names.find(cat);
    if (it == names.end()) {
      throw ImportError(fmt::format("hidden world annotations[{}]: unknown category", i));
    }
    const auto& bb = a.at("bbox");
    HiddenObject obj;
    obj.object_id = a.at("id").is_string() ? a["id"].get<std::string>()
                                           : std::to_string(a["id"].get<std::int64_t>());
    obj.image_id = a.at("image_id").get<std::string>();
    obj.box = BBox::FromXywh(bb.at(0).get<double>(), bb.at(1).get<double>(),
                             bb.at(2).get<double>(), bb.at(3).get<double>());
    obj.class_label = it->second;
    world.AddObject(std::move(obj));
  }
  return world;
}

HiddenWorld HiddenWorld::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError(fmt::format("cannot open hidden world '{}'", path.string()));
  try {
    return FromJson(json::parse(in));
  } catch (const json::exception& e) {
    throw ImportError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void HiddenWorld::AddClass(const std::string& name) {
  if (IsBackground(name)) throw PreconditionError("Background is not an object class");
  if (std::find(classes_.begin(), classes_.end(), name) == classes_.end()) {
    classes_.push_back(name);
  }
}

void HiddenWorld::AddImage(ImageRecord image) {
  if (!(image.width > 0.0 && image.height > 0.0)) {
    throw PreconditionError(fmt::format("image '{}' needs a positive size", image.image_id));
  }
  objects_[image.image_id];
  const auto id = image.image_id;
  images_[id] = std::move(image);
}

void HiddenWorld::AddObject(HiddenObject object) {
  auto it = images_.find(object.image_id);
  if (it == images_.end()) {
    throw IntegrityError(fmt::format("object '{}' on unknown image '{}'", object.object_id,
                                     object.image_id));
  }
  ValidateBox(object.box);
  if (std::find(classes_.begin(), classes_.end(), object.class_label) == classes_.end()) {
    throw IntegrityError(fmt::format("object '{}' has unknown class '{}'", object.object_id,
                                     object.class_label));
  }
  objects_[object.image_id].push_back(std::move(object));
}

bool HiddenWorld::HasImage(std::string_view image_id) const {
  return objects_.find(image_id) != objects_.end();
}

const std::vector<HiddenObject>& HiddenWorld::ObjectsOn(std::string_view image_id) const {
  auto it = objects_.find(image_id);
  if (it == objects_.end()) {
    throw IntegrityError(fmt::format("image '{}' is not part of the hidden world", image_id));
  }
  return it->second;
}

std::size_t HiddenWorld::object_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : objects_) n += v.size();
  return n;
}

std::map<std::string, int> HiddenWorld::ClassTotals() const {
  std::map<std::string, int> out;
  for (const auto& c : classes_) out[c] = 0;
  for (const auto& [_, v] : objects_) {
    for (const auto& o : v) ++out[o.class_label];
  }
  return out;
}

namespace {

json CategoriesJson(const std::vector<std::string>& classes) {
  json cats = json::array();
  for (std::size_t i = 0; i < classes.size(); ++i) {
    cats.push_back({{"id", static_cast<int>(i + 1)}, {"name", classes[i]}});
  }
  return cats;
}

json ImageJson(const ImageRecord& im) {
  return {{"id", im.image_id},
          {"width", im.width},
          {"height", im.height},
          {"uri", im.uri},
          {"split", ToString(im.split)}};
}

json ObjectJson(const HiddenObject& o, const std::vector<std::string>& classes) {
  const auto idx = std::find(classes.begin(), classes.end(), o.class_label) - classes.begin();
  return {{"id", o.object_id},
          {"image_id", o.image_id},
          {"category_id", static_cast<int>(idx + 1)},
          {"bbox", {o.box.x_min, o.box.y_min, o.box.Width(), o.box.Height()}}};
}

}  // namespace

json HiddenWorld::ToJson() const {
  json doc = PublicImagesDocument();
  doc["hidden"] = true;
  for (const auto& [_, v] : objects_) {
    for (const auto& o : v) doc["annotations"].push_back(ObjectJson(o, classes_));
  }
  return doc;
}

json HiddenWorld::PublicImagesDocument() const {
  json doc;
  doc["images"] = json::array();
  for (const auto& [_, im] : images_) doc["images"].push_back(ImageJson(im));
  doc["categories"] = CategoriesJson(classes_);
  doc["annotations"] = json::array();
  return doc;
}

json HiddenWorld::BoxesDocument(Split split) const {
  json doc;
  doc["images"] = json::array();
  doc["categories"] = CategoriesJson(classes_);
  doc["annotations"] = json::array();
  for (const auto& [id, im] : images_) {
    if (im.split != split) continue;
    doc["images"].push_back(ImageJson(im));
    for (const auto& o : ObjectsOn(id)) doc["annotations"].push_back(ObjectJson(o, classes_));
  }
  return doc;
}

// --- Detector -----------------------------------------------------------------

void Validate(const SimDetectorConfig& cfg) {
  if (!(0.0 <= cfg.p_min && cfg.p_min <= cfg.p_max && cfg.p_max <= 1.0)) {
    throw ConfigError("detector requires 0 <= p_min <= p_max <= 1");
  }
  if (cfg.box_jitter_sigma < 0.0 || cfg.fp_rate0 < 0.0 || cfg.fp_decay_beta < 0.0) {
    throw ConfigError("detector rates must be >= 0");
  }
  if (cfg.class_confusion < 0.0 || cfg.class_confusion > 1.0) {
    throw ConfigError("class_confusion must lie in [0, 1]");
  }
  if (cfg.true_score_alpha <= 0.0 || cfg.true_score_beta <= 0.0 || cfg.fp_score_alpha <= 0.0 ||
      cfg.fp_score_beta <= 0.0) {
    throw ConfigError("score distribution parameters must be > 0");
  }
  if (!(cfg.fp_min_size > 0.0 && cfg.fp_min_size <= cfg.fp_max_size)) {
    throw ConfigError("false-positive size range is invalid");
  }
}

json DetectorState::ToJson() const {
  return {{"class_fraction", class_fraction}, {"background_labels", background_labels}};
}

DetectorState DetectorState::FromJson(const json& j) {
  DetectorState s;
  s.class_fraction = j.at("class_fraction").get<std::map<std::string, double>>();
  s.background_labels = j.at("background_labels").get<int>();
  return s;
}

DetectorState DetectorStateFrom(const Dataset& dataset, const HiddenWorld& world,
                                bool use_background) {
  DetectorState state;
  const auto totals = world.ClassTotals();
  const auto labeled =
      ClassCounts(dataset, {AnnotationState::kSeed, AnnotationState::kApproved});
  for (const auto& [cls, total] : totals) {
    auto it = labeled.find(cls);
    const double n = it == labeled.end() ? 0.0 : it->second;
    state.class_fraction[cls] = total > 0 ? std::min(1.0, n / total) : 0.0;
  }
  if (use_background) {
    state.background_labels = static_cast<int>(
        dataset.AnnotationsInStates({AnnotationState::kBackgroundConfirmed}).size());
  }
  return state;
}

double EmissionProbability(const SimDetectorConfig& cfg, double class_fraction) {
  const double f = std::clamp(class_fraction, 0.0, 1.0);
  return cfg.p_min + (cfg.p_max - cfg.p_min) * f;
}

double FalsePositiveRate(const SimDetectorConfig& cfg, int background_labels) {
  return cfg.fp_rate0 * std::exp(-cfg.fp_decay_beta * static_cast<double>(background_labels));
}

SimulatedDetector::SimulatedDetector(const HiddenWorld& world, SimDetectorConfig cfg)
    : world_(world), cfg_(std::move(cfg)) {
  Validate(cfg_);
}

std::vector<Detection> SimulatedDetector::Detect(const std::string& image_id,
                                                 const DetectorState& state,
                                                 std::uint64_t seed) const {
  const auto& objects = world_.ObjectsOn(image_id);
  const auto& image = world_.images().at(image_id);
  const auto extent = image.Extent();
  const auto& classes = world_.classes();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Detection> out;

  for (const auto& obj : objects) {
    // Draw every variate unconditionally so one object's outcome does not
    // shift the stream of the next.
    const double u_emit = Uniform01(rng);
    const double u_conf = Uniform01(rng);
    const double u_cls = Uniform01(rng);
    double jitter[4];
    for (double& j : jitter) j = normal(rng);
    const double score =
        SampleBeta(rng, cfg_.true_score_alpha, cfg_.true_score_beta);

    auto it = state.class_fraction.find(obj.class_label);
    const double f = it == state.class_fraction.end() ? 0.0 : it->second;
    if (u_emit >= EmissionProbability(cfg_, f)) continue;

    const double sw = cfg_.box_jitter_sigma * obj.box.Width();
    const double sh = cfg_.box_jitter_sigma * obj.box.Height();
    BBox box{obj.box.x_min + sw * jitter[0], obj.box.y_min + sh * jitter[1],
             obj.box.x_max + sw * jitter[2], obj.box.y_max + sh * jitter[3]};
    auto clipped = box.IsValid() ? ClipBox(box, extent) : std::nullopt;
    if (!clipped) clipped = obj.box;

    std::string cls = obj.class_label;
    if (classes.size() > 1 && u_conf < cfg_.class_confusion) {
      // Uniform over the other classes.
      auto k = static_cast<std::size_t>(u_cls * static_cast<double>(classes.size() - 1));
      k = std::min(k, classes.size() - 2);
      std::vector<std::string> others;
      for (const auto& c : classes) {
        if (c != obj.class_label) others.push_back(c);
      }
      cls = others[k];
    }
    out.push_back(Detection{*clipped, cls, score, obj.object_id});
  }

  const double rate = FalsePositiveRate(cfg_, state.background_labels);
  const int n_fp = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng) : 0;
  for (int i = 0; i < n_fp && !classes.empty(); ++i) {
    const double side_w = cfg_.fp_min_size + Uniform01(rng) * (cfg_.fp_max_size - cfg_.fp_min_size);
    const double side_h = cfg_.fp_min_size + Uniform01(rng) * (cfg_.fp_max_size - cfg_.fp_min_size);
    const double w = std::min(side_w, extent.width);
    const double h = std::min(side_h, extent.height);
    const double x = Uniform01(rng) * (extent.width - w);
    const double y = Uniform01(rng) * (extent.height - h);
    const auto k = std::min(static_cast<std::size_t>(Uniform01(rng) * classes.size()),
                            classes.size() - 1);
    const double score = SampleBeta(rng, cfg_.fp_score_alpha, cfg_.fp_score_beta);
    out.push_back(Detection{BBox{x, y, x + w, y + h}, classes[k], score, ""});
  }
  return out;
}

std::map<std::string, std::vector<Detection>> SimulatedDetector::DetectAll(
    const std::vector<std::string>& image_ids, const DetectorState& state,
    std::uint64_t seed) const {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& id : image_ids) out[id] = Detect(id, state, DeriveSeed(seed, id));
  return out;
}

std::vector<Detection> SelfDedup(std::vector<Detection> detections, double dedup_iou) {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (auto& d : detections) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return k.class_label == d.class_label && Iou(k.box, d.box) >= dedup_iou;
    });
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

std::vector<Detection> FilterNew(const std::vector<Detection>& detections,
                                 const std::vector<const Annotation*>& existing,
                                 double dedup_iou) {
  if (!(dedup_iou > 0.0 && dedup_iou < 1.0)) {
    throw PreconditionError("dedup_iou must lie in (0, 1)");
  }
  std::vector<Detection> out;
  for (auto& d : SelfDedup(detections, dedup_iou)) {
    const bool known = std::any_of(existing.begin(), existing.end(), [&](const Annotation* a) {
      return a->state != AnnotationState::kRejected && Iou(a->box, d.box) >= dedup_iou;
    });
    if (!known) out.push_back(std::move(d));
  }
  return out;
}

json DetectionsToJson(const std::map<std::string, std::vector<Detection>>& dets) {
  json out = json::object();
  for (const auto& [image, list] : dets) {
    json arr = json::array();
    for (const auto& d : list) {
      arr.push_back({{"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}},
                     {"class", d.class_label},
                     {"score", d.score}});
    }
    out[image] = std::move(arr);
  }
  return out;
}

std::map<std::string, std::vector<Detection>> DetectionsFromJson(const json& j) {
  std::map<std::string, std::vector<Detection>> out;
  for (const auto& [image, arr] : j.items()) {
    auto& list = out[image];
    for (const auto& d : arr) {
      const auto& b = d.at("box");
      list.push_back(Detection{BBox{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                                    b[3].get<double>()},
                               d.at("class").get<std::string>(), d.at("score").get<double>(),
                               ""});
    }
  }
  return out;
}

// --- Features -----------------------------------------------------------------

SimFeatureSource::SimFeatureSource(const HiddenWorld& world, std::uint64_t seed, double noise)
    : world_(world), seed_(seed), noise_(noise) {}

std::vector<std::vector<double>> SimFeatureSource::Features(
    const ImageMeta& meta, std::span<const BBox> anchors) const {
  std::vector<BBox> truth;
  for (const auto& o : world_.ObjectsOn(meta.image_id)) {
    if (auto b = TransformBox(meta, o.box, 1e-9)) truth.push_back(*b);
  }
  const auto& p = meta.params;
  std::uint64_t s = DeriveSeed(seed_, meta.image_id);
  s = DeriveSeed(s, static_cast<std::uint64_t>(std::llround(p.crop_x * 1000.0)));
  s = DeriveSeed(s, static_cast<std::uint64_t>(std::llround(p.crop_y * 1000.0)));
  s = DeriveSeed(s, static_cast<std::uint64_t>((p.flip_horizontal ? 1 : 0) |
                                              (p.flip_vertical ? 2 : 0)));
  Rng rng(s);
  std::normal_distribution<double> normal(0.0, noise_);

  std::vector<std::vector<double>> out(anchors.size(), std::vector<double>(kDim, 0.0));
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    auto& f = out[a];
    double best = 0.0;
    const BBox* best_box = nullptr;
    for (const auto& t : truth) {
      const double v = Iou(anchors[a], t);
      if (v > best) {
        best = v;
        best_box = &t;
      }
    }
    f[0] = 1.0;
    f[1] = p.brightness * best;
    if (best_box) {
      const auto d = EncodeDelta(anchors[a], *best_box);
      for (int c = 0; c < 4; ++c) f[2 + c] = std::clamp(d[c], -4.0, 4.0);
    }
    f[6] = normal(rng);
  }
  return out;
}

}  // namespace reeflabel
