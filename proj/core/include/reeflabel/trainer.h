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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reeflabel/geometry.h"
#include "reeflabel/labelstore.h"

namespace reeflabel {

// ---------------------------------------------------------------------------
// Configuration.

struct AnchorGridConfig {
  double stride = 32.0;
  std::vector<double> scales = {48.0, 96.0};
  std::vector<double> ratios = {0.5, 1.0, 2.0};
};

struct AugmentConfig {
  bool enabled = true;
  bool flip_horizontal = true;
  bool flip_vertical = true;
  double brightness_min = 0.8;
  double brightness_max = 1.2;
  double crop_min = 0.8;
  double crop_max = 1.0;
  // Boxes keeping less than this fraction of their area inside a crop are dropped.
  double min_retained_area = 0.25;
};

enum class EmptyBatchPolicy { kError, kZeroWithWarning };

struct TrainConfig {
  // Unmatched anchors scoring above this are Ignored rather than sampled negative.
  double ignore_threshold = 0.9;
  bool ignore_rule = true;
  // Feed BackgroundConfirmed labels as forced negatives.
  bool background_labels = true;
  int minibatch_size = 256;
  double positive_fraction = 0.5;
  double lambda = 1.0;
  double match_iou_pos = 0.7;
  double match_iou_neg = 0.3;
  double learning_rate = 2.0;
  double divergence_limit = 1e6;
  double clamp_epsilon = 1e-7;
  EmptyBatchPolicy empty_batch = EmptyBatchPolicy::kError;
  AnchorGridConfig anchors;
  AugmentConfig augment;
};

// Throws ConfigError on out-of-range values.
void Validate(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Anchors and samples.

struct Anchor {
  BBox box;
  std::vector<double> feature;
  std::size_t grid_index = 0;
};

// Tiles an image with stride/scale/ratio anchors clipped to the image.
std::vector<BBox> GenerateAnchorBoxes(const ImageExtent& extent, const AnchorGridConfig& cfg);

enum class AnchorRole { kPositiveI, kLabeledBackgroundJ, kNegativeK, kIgnored, kUnused };
std::string_view ToString(AnchorRole role);

struct AnchorSample {
  std::size_t anchor = 0;  // index into the anchor list
  AnchorRole role = AnchorRole::kUnused;
  double p = 0.5;
  double p_star = 0.0;
  std::optional<BoxDelta> t;
  std::optional<BoxDelta> t_star;
};

// Assigns a role to every anchor. Positives are anchors with IoU >= pos (or
// the best anchor) for an object; anchors on a background label are forced
// negatives j; unmatched anchors scoring above the ignore threshold are
// Ignored; the minibatch is filled with all j first, then random k.
std::vector<AnchorSample> MatchAndSample(std::span<const BBox> anchors,
                                         std::span<const BBox> objects,
                                         std::span<const BBox> background_labels,
                                         std::span<const double> scores,
                                         const TrainConfig& cfg, std::uint64_t seed);

// Anchors that may be handed to a second stage; Ignored ones never are.
std::vector<std::size_t> ForwardableAnchors(std::span<const AnchorSample> samples);

// ---------------------------------------------------------------------------
// Loss.

double ClassificationLoss(double p, double p_star, double epsilon = 1e-7);
double SmoothL1(double d);
double LocalizationLoss(const BoxDelta& t, const BoxDelta& t_star);

struct LossBreakdown {
  double total = 0.0;
  double cls_i = 0.0;  // already divided by N
  double cls_j = 0.0;
  double cls_k = 0.0;
  double reg = 0.0;  // already scaled by lambda / N
  std::size_t active = 0;
};

// (1/N)[sum_i Lcls(p_i,1) + sum_j Lcls(p_j,0) + sum_k Lcls(p_k,0)]
//   + lambda (1/N) sum_i Lreg(t_i, t_i*), with N = cfg.minibatch_size.
LossBreakdown TotalLoss(std::span<const AnchorSample> samples, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Scoring model contract.

struct ModelOutput {
  double p = 0.5;
  BoxDelta t;
};

class ScoringModel {
 public:
  virtual ~ScoringModel() = default;

  virtual std::size_t feature_dim() const = 0;
  virtual std::span<const double> params() const = 0;
  virtual std::span<double> mutable_params() = 0;
  std::size_t num_params() const { return params().size(); }

  // p must lie strictly inside (0, 1).
  virtual ModelOutput Forward(std::span<const double> feature) const = 0;
  // Accumulates dLoss/dTheta into `grad` given the loss gradient with respect
  // to the outputs.
  virtual void Backward(std::span<const double> feature, double dloss_dp,
                        const BoxDelta& dloss_dt, std::span<double> grad) const = 0;
  virtual std::unique_ptr<ScoringModel> Clone() const = 0;
};

// p = sigmoid(w . x), t_c = r_c . x. Parameters laid out as [w | r_tx | r_ty | r_tw | r_th].
class LinearLogisticModel : public ScoringModel {
 public:
  explicit LinearLogisticModel(std::size_t feature_dim);
  LinearLogisticModel(std::size_t feature_dim, std::vector<double> params);

  std::size_t feature_dim() const override { return dim_; }
  std::span<const double> params() const override { return params_; }
  std::span<double> mutable_params() override { return params_; }
  ModelOutput Forward(std::span<const double> feature) const override;
  void Backward(std::span<const double> feature, double dloss_dp, const BoxDelta& dloss_dt,
                std::span<double> grad) const override;
  std::unique_ptr<ScoringModel> Clone() const override;

  // Index of the first localization parameter.
  std::size_t regression_offset() const { return dim_; }

 private:
  std::size_t dim_;
  std::vector<double> params_;
};

// Refreshes p and t of every sample from the model.
void ScoreSamples(const ScoringModel& model, std::span<const Anchor> anchors,
                  std::span<AnchorSample> samples);

// Loss of `samples` after rescoring with `model`.
LossBreakdown EvaluateLoss(const ScoringModel& model, std::span<const Anchor> anchors,
                           std::vector<AnchorSample> samples, const TrainConfig& cfg);

// Per-sample contribution to the gradient, for instrumentation.
struct GradientTrace {
  std::vector<std::vector<double>> per_sample;
};

// Analytic gradient of EvaluateLoss with respect to the model parameters.
// Throws NumericError naming the first non-finite parameter index.
std::vector<double> LossGradient(const ScoringModel& model, std::span<const Anchor> anchors,
                                 std::span<const AnchorSample> samples,
                                 const TrainConfig& cfg, GradientTrace* trace = nullptr);

// ---------------------------------------------------------------------------
// Augmentation.

struct AugmentParams {
  bool flip_horizontal = false;
  bool flip_vertical = false;
  double brightness = 1.0;
  double crop_ratio = 1.0;
  double crop_x = 0.0;  // crop window origin in the source frame
  double crop_y = 0.0;
};

struct ImageMeta {
  std::string image_id;
  double width = 0.0;  // frame after augmentation
  double height = 0.0;
  double source_width = 0.0;
  double source_height = 0.0;
  AugmentParams params;

  static ImageMeta Identity(std::string image_id, double width, double height);
  ImageExtent Extent() const { return {width, height}; }
};

AugmentParams SampleAugmentParams(double width, double height, const AugmentConfig& cfg,
                                  std::uint64_t seed);

// Maps a source-frame box into the augmented frame (crop, then flips). Returns
// nullopt when less than `min_retained_area` of the box survives the crop.
std::optional<BBox> TransformBox(const ImageMeta& meta, const BBox& box,
                                 double min_retained_area);

struct AugmentResult {
  ImageMeta meta;
  std::vector<BBox> boxes;
  std::vector<std::size_t> kept;  // source index of each output box
};

AugmentResult ApplyAugment(const ImageMeta& source, const AugmentParams& params,
                           std::span<const BBox> boxes, double min_retained_area);

// Samples parameters from `cfg` with `seed` and applies them.
AugmentResult Augment(const ImageMeta& source, std::span<const BBox> boxes,
                      const AugmentConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Training.

// Supplies per-anchor features for an (augmented) image.
class AnchorFeatureSource {
 public:
  virtual ~AnchorFeatureSource() = default;
  virtual std::size_t feature_dim() const = 0;
  virtual std::vector<std::vector<double>> Features(const ImageMeta& meta,
                                                    std::span<const BBox> anchors) const = 0;
};

struct TrainingImage {
  ImageMeta meta;  // untransformed
  std::vector<BBox> objects;
  std::vector<BBox> backgrounds;
};

// Labeled images for training: Seed/Approved objects, plus BackgroundConfirmed
// boxes when `include_background`.
std::vector<TrainingImage> TrainingImagesFromDataset(const Dataset& dataset,
                                                     bool include_background);

struct EpochLoss {
  int epoch = 0;
  double loss = 0.0;
  double cls_i = 0.0;
  double cls_j = 0.0;
  double cls_k = 0.0;
  double reg = 0.0;
};

struct TrainResult {
  std::vector<EpochLoss> trace;
};

// Plain per-image gradient descent. Throws PreconditionError without any
// labeled object and NumericError when the loss exceeds the divergence limit.
TrainResult TrainEpochs(ScoringModel& model, std::span<const TrainingImage> images,
                        const AnchorFeatureSource& features, const TrainConfig& cfg,
                        int epochs, std::uint64_t seed);

// `epoch,loss,cls_i,cls_j,cls_k,reg` CSV.
std::string LossTraceCsv(std::span<const EpochLoss> trace);

}  // namespace reeflabel
