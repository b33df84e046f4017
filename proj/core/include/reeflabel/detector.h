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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reeflabel/geometry.h"
#include "reeflabel/labelstore.h"
#include "reeflabel/trainer.h"

namespace reeflabel {

// ---------------------------------------------------------------------------
// Hidden world: the simulation's private ground truth. Only the simulated
// detector, the simulated workers and the evaluator read it.

struct HiddenObject {
  std::string object_id;
  std::string image_id;
  BBox box;
  std::string class_label;
};

class HiddenWorld {
 public:
  HiddenWorld() = default;

  // Parses box-JSON carrying `"hidden": true`; anything else is refused.
  static HiddenWorld FromJson(const nlohmann::json& document);
  static HiddenWorld Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;

  void AddClass(const std::string& name);
  void AddImage(ImageRecord image);
  void AddObject(HiddenObject object);

  const std::vector<std::string>& classes() const { return classes_; }
  const std::map<std::string, ImageRecord>& images() const { return images_; }
  bool HasImage(std::string_view image_id) const;
  // Throws IntegrityError for images the world does not know.
  const std::vector<HiddenObject>& ObjectsOn(std::string_view image_id) const;
  std::size_t object_count() const;
  std::map<std::string, int> ClassTotals() const;

  // The public part of the world: images and categories, no objects.
  nlohmann::json PublicImagesDocument() const;
  // Box-JSON of every object on images of `split` (used to seed the store).
  nlohmann::json BoxesDocument(Split split) const;

 private:
  std::vector<std::string> classes_;
  std::map<std::string, ImageRecord> images_;
  std::map<std::string, std::vector<HiddenObject>, std::less<>> objects_;
};

// ---------------------------------------------------------------------------

struct Detection {
  BBox box;
  std::string class_label;
  double score = 0.0;
  // Simulation bookkeeping: id of the hidden object it came from, empty for
  // false positives. Never written to the label store or shown to workers.
  std::string source_object;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct SimDetectorConfig {
  double p_min = 0.35;
  double p_max = 0.95;
  double box_jitter_sigma = 0.05;
  double fp_rate0 = 1.5;
  double fp_decay_beta = 0.02;
  // Probability that an emitted true object carries a wrong class.
  double class_confusion = 0.1;
  double true_score_alpha = 5.0;
  double true_score_beta = 2.0;
  double fp_score_alpha = 2.0;
  double fp_score_beta = 5.0;
  // False-positive box side range in pixels.
  double fp_min_size = 30.0;
  double fp_max_size = 130.0;
};

// Throws ConfigError on out-of-range values.
void Validate(const SimDetectorConfig& cfg);

// Summary of the labeled state the simulated detector was "trained" on.
struct DetectorState {
  // f_c: fraction of hidden class-c instances currently labeled Approved/Seed.
  std::map<std::string, double> class_fraction;
  // B: BackgroundConfirmed labels used in training.
  int background_labels = 0;

  nlohmann::json ToJson() const;
  static DetectorState FromJson(const nlohmann::json& j);
};

// Builds the state from a dataset. `use_background` false forces B = 0.
DetectorState DetectorStateFrom(const Dataset& dataset, const HiddenWorld& world,
                                bool use_background);

double EmissionProbability(const SimDetectorConfig& cfg, double class_fraction);
double FalsePositiveRate(const SimDetectorConfig& cfg, int background_labels);

class SimulatedDetector {
 public:
  SimulatedDetector(const HiddenWorld& world, SimDetectorConfig cfg);

  // Pure function of (world, state, seed). Throws IntegrityError for unknown
  // images.
  std::vector<Detection> Detect(const std::string& image_id, const DetectorState& state,
                                std::uint64_t seed) const;

  // Per-image seeds are DeriveSeed(seed, image_id).
  std::map<std::string, std::vector<Detection>> DetectAll(
      const std::vector<std::string>& image_ids, const DetectorState& state,
      std::uint64_t seed) const;

  const SimDetectorConfig& config() const { return cfg_; }

 private:
  const HiddenWorld& world_;
  SimDetectorConfig cfg_;
};

// Greedy same-class suppression keeping the highest score.
std::vector<Detection> SelfDedup(std::vector<Detection> detections, double dedup_iou);

// Drops detections overlapping an existing non-Rejected annotation with
// IoU >= dedup_iou, after self-deduplication.
std::vector<Detection> FilterNew(const std::vector<Detection>& detections,
                                 const std::vector<const Annotation*>& existing,
                                 double dedup_iou = 0.5);

nlohmann::json DetectionsToJson(const std::map<std::string, std::vector<Detection>>& dets);
std::map<std::string, std::vector<Detection>> DetectionsFromJson(const nlohmann::json& j);

// Anchor features for the reference linear-logistic model, computed from the
// hidden world: [bias, brightness * max IoU, encoded delta to the best object
// (4), noise]. The augmented frame is mapped back through the image meta.
class SimFeatureSource : public AnchorFeatureSource {
 public:
  SimFeatureSource(const HiddenWorld& world, std::uint64_t seed, double noise = 0.05);

  static constexpr std::size_t kDim = 7;
  std::size_t feature_dim() const override { return kDim; }
  std::vector<std::vector<double>> Features(const ImageMeta& meta,
                                            std::span<const BBox> anchors) const override;

 private:
  const HiddenWorld& world_;
  std::uint64_t seed_;
  double noise_;
};

}  // namespace reeflabel
