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

#include "reeflabel/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reeflabel/errors.h"
#include "reeflabel/rng.h"

namespace reeflabel {

namespace {

double Sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Fast IoU for already-validated boxes.
double RawIou(const BBox& a, const BBox& b) {
  const double inter = IntersectionArea(a, b);
  if (inter <= 0.0) return 0.0;
  return inter / (a.Area() + b.Area() - inter);
}

void Subsample(std::vector<std::size_t>& idx, std::size_t keep, Rng& rng) {
  if (idx.size() <= keep) return;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
}

bool IsActive(AnchorRole r) {
  return r == AnchorRole::kPositiveI || r == AnchorRole::kLabeledBackgroundJ ||
         r == AnchorRole::kNegativeK;
}

void CheckSample(const AnchorSample& s) {
  switch (s.role) {
    case AnchorRole::kPositiveI:
      if (s.p_star != 1.0 || !s.t_star) {
        throw PreconditionError(
            fmt::format("positive sample {} needs p*=1 and a target box", s.anchor));
      }
      if (!s.t) throw PreconditionError(fmt::format("positive sample {} lacks t", s.anchor));
      break;
    case AnchorRole::kLabeledBackgroundJ:
    case AnchorRole::kNegativeK:
      if (s.p_star != 0.0 || s.t_star) {
        throw PreconditionError(
            fmt::format("negative sample {} needs p*=0 and no target box", s.anchor));
      }
      break;
    default:
      break;
  }
}

}  // namespace

void Validate(const TrainConfig& cfg) {
  auto open_unit = [](double v) { return v > 0.0 && v < 1.0; };
  if (!open_unit(cfg.ignore_threshold) || !open_unit(cfg.match_iou_pos) ||
      !open_unit(cfg.match_iou_neg) || !open_unit(cfg.positive_fraction)) {
    throw ConfigError("trainer thresholds must lie in (0, 1)");
  }
  if (cfg.match_iou_neg > cfg.match_iou_pos) {
    throw ConfigError("match_iou_neg must not exceed match_iou_pos");
  }
  if (cfg.minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (cfg.anchors.stride <= 0.0 || cfg.anchors.scales.empty() || cfg.anchors.ratios.empty()) {
    throw ConfigError("anchor grid needs a positive stride, scales and ratios");
  }
  const auto& a = cfg.augment;
  if (a.brightness_min <= 0.0 || a.brightness_min > a.brightness_max || a.crop_min <= 0.0 ||
      a.crop_min > a.crop_max || a.crop_max > 1.0) {
    throw ConfigError("augmentation ranges are invalid");
  }
}

std::vector<BBox> GenerateAnchorBoxes(const ImageExtent& extent, const AnchorGridConfig& cfg) {
  std::vector<BBox> out;
  for (double cy = 0.5 * cfg.stride; cy < extent.height; cy += cfg.stride) {
    for (double cx = 0.5 * cfg.stride; cx < extent.width; cx += cfg.stride) {
      for (double s : cfg.scales) {
        for (double r : cfg.ratios) {
          const double w = s * std::sqrt(r);
          const double h = s / std::sqrt(r);
          auto clipped =
              ClipBox(BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h}, extent);
          if (clipped) out.push_back(*clipped);
        }
      }
    }
  }
  return out;
}

std::string_view ToString(AnchorRole role) {
  switch (role) {
    case AnchorRole::kPositiveI: return "positive_i";
    case AnchorRole::kLabeledBackgroundJ: return "background_j";
    case AnchorRole::kNegativeK: return "negative_k";
    case AnchorRole::kIgnored: return "ignored";
    case AnchorRole::kUnused: return "unused";
  }
  return "unused";
}

std::vector<AnchorSample> MatchAndSample(std::span<const BBox> anchors,
                                         std::span<const BBox> objects,
                                         std::span<const BBox> background_labels,
                                         std::span<const double> scores,
                                         const TrainConfig& cfg, std::uint64_t seed) {
  if (anchors.empty()) throw PreconditionError("no anchors");
  if (scores.size() != anchors.size()) {
    throw PreconditionError(fmt::format("{} scores for {} anchors", scores.size(),
                                        anchors.size()));
  }
  const std::size_t n = anchors.size();
  std::vector<double> best_obj_iou(n, 0.0);
  std::vector<int> best_obj(n, -1);
  std::vector<double> best_bg_iou(n, 0.0);
  std::vector<bool> forced_pos(n, false);
  std::vector<bool> forced_bg(n, false);

  for (std::size_t o = 0; o < objects.size(); ++o) {
    double top = 0.0;
    std::size_t top_idx = 0;
    for (std::size_t a = 0; a < n; ++a) {
      const double v = RawIou(anchors[a], objects[o]);
      if (v > best_obj_iou[a]) {
        best_obj_iou[a] = v;
        best_obj[a] = static_cast<int>(o);
      }
      if (v > top) {
        top = v;
        top_idx = a;
      }
    }
    if (top > 0.0) {
      forced_pos[top_idx] = true;
      if (best_obj[top_idx] != static_cast<int>(o) && best_obj_iou[top_idx] <= top) {
        best_obj[top_idx] = static_cast<int>(o);
      }
    }
  }
  for (const auto& bg : background_labels) {
    double top = 0.0;
    std::size_t top_idx = 0;
    for (std::size_t a = 0; a < n; ++a) {
      const double v = RawIou(anchors[a], bg);
      best_bg_iou[a] = std::max(best_bg_iou[a], v);
      if (v > top) {
        top = v;
        top_idx = a;
      }
    }
    if (top > 0.0) forced_bg[top_idx] = true;
  }

  std::vector<AnchorSample> samples(n);
  std::vector<std::size_t> positives, backgrounds, negatives;
  for (std::size_t a = 0; a < n; ++a) {
    auto& s = samples[a];
    s.anchor = a;
    s.p = scores[a];
    if (best_obj[a] >= 0 && (best_obj_iou[a] >= cfg.match_iou_pos || forced_pos[a])) {
      positives.push_back(a);
    } else if (best_bg_iou[a] >= cfg.match_iou_pos || forced_bg[a]) {
      backgrounds.push_back(a);
    } else if (cfg.ignore_rule && scores[a] > cfg.ignore_threshold) {
      s.role = AnchorRole::kIgnored;
    } else if (std::max(best_obj_iou[a], best_bg_iou[a]) < cfg.match_iou_neg) {
      negatives.push_back(a);
    }
  }
  if (positives.empty()) {
    spdlog::debug("match_and_sample: no positive anchors; negatives only");
  }

  Rng rng(seed);
  const auto batch = static_cast<std::size_t>(cfg.minibatch_size);
  const auto max_pos = static_cast<std::size_t>(
      std::floor(cfg.positive_fraction * static_cast<double>(batch)));
  Subsample(positives, max_pos, rng);
  Subsample(backgrounds, batch - positives.size(), rng);
  Subsample(negatives, batch - positives.size() - backgrounds.size(), rng);

  for (auto a : positives) {
    auto& s = samples[a];
    s.role = AnchorRole::kPositiveI;
    s.p_star = 1.0;
    s.t_star = EncodeDelta(anchors[a], objects[static_cast<std::size_t>(best_obj[a])]);
  }
  for (auto a : backgrounds) {
    samples[a].role = AnchorRole::kLabeledBackgroundJ;
    samples[a].p_star = 0.0;
  }
  for (auto a : negatives) {
    samples[a].role = AnchorRole::kNegativeK;
    samples[a].p_star = 0.0;
  }
  return samples;
}

std::vector<std::size_t> ForwardableAnchors(std::span<const AnchorSample> samples) {
  std::vector<std::size_t> out;
  for (const auto& s : samples) {
    if (s.role != AnchorRole::kIgnored) out.push_back(s.anchor);
  }
  return out;
}

double ClassificationLoss(double p, double p_star, double epsilon) {
  const double q = std::clamp(p, epsilon, 1.0 - epsilon);
  return -(p_star * std::log(q) + (1.0 - p_star) * std::log(1.0 - q));
}

double SmoothL1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

double LocalizationLoss(const BoxDelta& t, const BoxDelta& t_star) {
  double sum = 0.0;
  for (int c = 0; c < 4; ++c) {
    if (!std::isfinite(t[c]) || !std::isfinite(t_star[c])) {
      throw PreconditionError("box deltas must be finite");
    }
    sum += SmoothL1(t[c] - t_star[c]);
  }
  return sum;
}

LossBreakdown TotalLoss(std::span<const AnchorSample> samples, const TrainConfig& cfg) {
  if (cfg.minibatch_size <= 0) throw PreconditionError("minibatch size N must be > 0");
  const double inv_n = 1.0 / static_cast<double>(cfg.minibatch_size);
  LossBreakdown out;
  double sum_i = 0.0, sum_j = 0.0, sum_k = 0.0, sum_reg = 0.0;
  for (const auto& s : samples) {
    CheckSample(s);
    switch (s.role) {
      case AnchorRole::kPositiveI:
        sum_i += ClassificationLoss(s.p, 1.0, cfg.clamp_epsilon);
        sum_reg += LocalizationLoss(*s.t, *s.t_star);
        break;
      case AnchorRole::kLabeledBackgroundJ:
        sum_j += ClassificationLoss(s.p, 0.0, cfg.clamp_epsilon);
        break;
      case AnchorRole::kNegativeK:
        sum_k += ClassificationLoss(s.p, 0.0, cfg.clamp_epsilon);
        break;
      default:
        continue;
    }
    ++out.active;
  }
  if (out.active == 0) {
    if (cfg.empty_batch == EmptyBatchPolicy::kError) {
      throw PreconditionError("minibatch has no active samples (effective N is zero)");
    }
    spdlog::warn("minibatch has no active samples; loss is 0");
    return out;
  }
  out.cls_i = inv_n * sum_i;
  out.cls_j = inv_n * sum_j;
  out.cls_k = inv_n * sum_k;
  out.reg = cfg.lambda * inv_n * sum_reg;
  out.total = out.cls_i + out.cls_j + out.cls_k + out.reg;
  return out;
}

// --- LinearLogisticModel ----------------------------------------------------

LinearLogisticModel::LinearLogisticModel(std::size_t feature_dim)
    : dim_(feature_dim), params_(5 * feature_dim, 0.0) {}

LinearLogisticModel::LinearLogisticModel(std::size_t feature_dim, std::vector<double> params)
    : dim_(feature_dim), params_(std::move(params)) {
  if (params_.size() != 5 * dim_) {
    throw PreconditionError(fmt::format("linear-logistic model with {} features needs {} "
                                        "parameters, got {}",
                                        dim_, 5 * dim_, params_.size()));
  }
}

ModelOutput LinearLogisticModel::Forward(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw PreconditionError(fmt::format("feature size {} != {}", x.size(), dim_));
  }
  ModelOutput out;
  double z = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) z += params_[i] * x[i];
  out.p = Sigmoid(z);
  for (int c = 0; c < 4; ++c) {
    const double* r = params_.data() + dim_ * (1 + c);
    double v = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) v += r[i] * x[i];
    out.t[c] = v;
  }
  return out;
}

void LinearLogisticModel::Backward(std::span<const double> x, double dloss_dp,
                                   const BoxDelta& dloss_dt, std::span<double> grad) const {
  const double p = Forward(x).p;
  const double dz = dloss_dp * p * (1.0 - p);
  for (std::size_t i = 0; i < dim_; ++i) grad[i] += dz * x[i];
  for (int c = 0; c < 4; ++c) {
    if (dloss_dt[c] == 0.0) continue;
    double* g = grad.data() + dim_ * (1 + c);
    for (std::size_t i = 0; i < dim_; ++i) g[i] += dloss_dt[c] * x[i];
  }
}

std::unique_ptr<ScoringModel> LinearLogisticModel::Clone() const {
  return std::make_unique<LinearLogisticModel>(*this);
}

void ScoreSamples(const ScoringModel& model, std::span<const Anchor> anchors,
                  std::span<AnchorSample> samples) {
  for (auto& s : samples) {
    const auto out = model.Forward(anchors[s.anchor].feature);
    s.p = out.p;
    s.t = out.t;
  }
}

LossBreakdown EvaluateLoss(const ScoringModel& model, std::span<const Anchor> anchors,
                           std::vector<AnchorSample> samples, const TrainConfig& cfg) {
  ScoreSamples(model, anchors, samples);
  return TotalLoss(samples, cfg);
}

std::vector<double> LossGradient(const ScoringModel& model, std::span<const Anchor> anchors,
                                 std::span<const AnchorSample> samples,
                                 const TrainConfig& cfg, GradientTrace* trace) {
  if (cfg.minibatch_size <= 0) throw PreconditionError("minibatch size N must be > 0");
  const double inv_n = 1.0 / static_cast<double>(cfg.minibatch_size);
  const std::size_t np = model.num_params();
  std::vector<double> grad(np, 0.0);
  if (trace) trace->per_sample.assign(samples.size(), std::vector<double>(np, 0.0));
  std::vector<double> local(np);

  for (std::size_t idx = 0; idx < samples.size(); ++idx) {
    const auto& s = samples[idx];
    if (!IsActive(s.role)) continue;
    CheckSample(s);
    const auto& x = anchors[s.anchor].feature;
    const auto out = model.Forward(x);
    const double eps = cfg.clamp_epsilon;
    double dloss_dp = 0.0;
    if (out.p > eps && out.p < 1.0 - eps) {
      dloss_dp = inv_n * (s.p_star == 1.0 ? -1.0 / out.p : 1.0 / (1.0 - out.p));
    }
    BoxDelta dloss_dt;
    if (s.role == AnchorRole::kPositiveI && cfg.lambda != 0.0) {
      for (int c = 0; c < 4; ++c) {
        const double d = out.t[c] - (*s.t_star)[c];
        const double dsl1 = std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0);
        dloss_dt[c] = cfg.lambda * inv_n * dsl1;
      }
    }
    std::fill(local.begin(), local.end(), 0.0);
    model.Backward(x, dloss_dp, dloss_dt, local);
    for (std::size_t k = 0; k < np; ++k) grad[k] += local[k];
    if (trace) trace->per_sample[idx] = local;
  }
  for (std::size_t k = 0; k < np; ++k) {
    if (!std::isfinite(grad[k])) {
      throw NumericError(fmt::format("non-finite gradient at parameter {}", k));
    }
  }
  return grad;
}

// --- Augmentation -----------------------------------------------------------

ImageMeta ImageMeta::Identity(std::string image_id, double width, double height) {
  ImageMeta m;
  m.image_id = std::move(image_id);
  m.width = m.source_width = width;
  m.height = m.source_height = height;
  return m;
}

AugmentParams SampleAugmentParams(double width, double height, const AugmentConfig& cfg,
                                  std::uint64_t seed) {
  AugmentParams p;
  if (!cfg.enabled) return p;
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  p.flip_horizontal = cfg.flip_horizontal && coin(rng);
  p.flip_vertical = cfg.flip_vertical && coin(rng);
  p.brightness = std::uniform_real_distribution<double>(cfg.brightness_min,
                                                        cfg.brightness_max)(rng);
  p.crop_ratio = cfg.crop_min == cfg.crop_max
                     ? cfg.crop_min
                     : std::uniform_real_distribution<double>(cfg.crop_min, cfg.crop_max)(rng);
  p.crop_x = Uniform01(rng) * (1.0 - p.crop_ratio) * width;
  p.crop_y = Uniform01(rng) * (1.0 - p.crop_ratio) * height;
  return p;
}

std::optional<BBox> TransformBox(const ImageMeta& meta, const BBox& box,
                                 double min_retained_area) {
  const auto& p = meta.params;
  const BBox window{p.crop_x, p.crop_y, p.crop_x + meta.width, p.crop_y + meta.height};
  const double inter = IntersectionArea(box, window);
  if (inter <= 0.0 || inter < min_retained_area * box.Area()) return std::nullopt;
  // Clamp again after the shift: (crop_x + width) - crop_x can round past width.
  BBox out{std::clamp(std::max(box.x_min, window.x_min) - p.crop_x, 0.0, meta.width),
           std::clamp(std::max(box.y_min, window.y_min) - p.crop_y, 0.0, meta.height),
           std::clamp(std::min(box.x_max, window.x_max) - p.crop_x, 0.0, meta.width),
           std::clamp(std::min(box.y_max, window.y_max) - p.crop_y, 0.0, meta.height)};
  if (p.flip_horizontal) out = BBox{meta.width - out.x_max, out.y_min, meta.width - out.x_min, out.y_max};
  if (p.flip_vertical) out = BBox{out.x_min, meta.height - out.y_max, out.x_max, meta.height - out.y_min};
  if (!out.IsValid()) return std::nullopt;
  return out;
}

AugmentResult ApplyAugment(const ImageMeta& source, const AugmentParams& params,
                           std::span<const BBox> boxes, double min_retained_area) {
  AugmentResult r;
  r.meta = source;
  r.meta.params = params;
  r.meta.width = params.crop_ratio * source.source_width;
  r.meta.height = params.crop_ratio * source.source_height;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (auto b = TransformBox(r.meta, boxes[i], min_retained_area)) {
      r.boxes.push_back(*b);
      r.kept.push_back(i);
    }
  }
  return r;
}

AugmentResult Augment(const ImageMeta& source, std::span<const BBox> boxes,
                      const AugmentConfig& cfg, std::uint64_t seed) {
  const auto params =
      SampleAugmentParams(source.source_width, source.source_height, cfg, seed);
  return ApplyAugment(source, params, boxes, cfg.min_retained_area);
}

// --- Training ---------------------------------------------------------------

std::vector<TrainingImage> TrainingImagesFromDataset(const Dataset& dataset,
                                                     bool include_background) {
  std::map<std::string, TrainingImage> by_image;
  for (const auto& [_, a] : dataset.annotations()) {
    const bool object =
        a.state == AnnotationState::kSeed || a.state == AnnotationState::kApproved;
    const bool background =
        include_background && a.state == AnnotationState::kBackgroundConfirmed;
    if (!object && !background) continue;
    auto it = by_image.find(a.image_id);
    if (it == by_image.end()) {
      const auto* im = dataset.FindImage(a.image_id);
      it = by_image
               .emplace(a.image_id,
                        TrainingImage{ImageMeta::Identity(a.image_id, im->width, im->height),
                                      {},
                                      {}})
               .first;
    }
    (object ? it->second.objects : it->second.backgrounds).push_back(a.box);
  }
  std::vector<TrainingImage> out;
  out.reserve(by_image.size());
  for (auto& [_, t] : by_image) out.push_back(std::move(t));
  return out;
}

TrainResult TrainEpochs(ScoringModel& model, std::span<const TrainingImage> images,
                        const AnchorFeatureSource& features, const TrainConfig& cfg,
                        int epochs, std::uint64_t seed) {
  Validate(cfg);
  const bool any_object = std::any_of(images.begin(), images.end(),
                                      [](const TrainingImage& t) { return !t.objects.empty(); });
  if (!any_object) throw PreconditionError("training needs at least one labeled object");
  if (features.feature_dim() != model.feature_dim()) {
    throw PreconditionError("feature source and model disagree on feature size");
  }

  TrainResult result;
  std::vector<std::size_t> order(images.size());
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto epoch_seed = DeriveSeed(seed, static_cast<std::uint64_t>(epoch));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLoss acc;
    acc.epoch = epoch;
    std::size_t batches = 0;
    for (auto idx : order) {
      const auto& img = images[idx];
      const auto image_seed = DeriveSeed(epoch_seed, img.meta.image_id);
      const auto params = SampleAugmentParams(img.meta.source_width, img.meta.source_height,
                                              cfg.augment, DeriveSeed(image_seed, 1));
      const auto objs = ApplyAugment(img.meta, params, img.objects, cfg.augment.min_retained_area);
      std::vector<BBox> bgs;
      if (cfg.background_labels) {
        bgs = ApplyAugment(img.meta, params, img.backgrounds, cfg.augment.min_retained_area).boxes;
      }
      const auto& meta = objs.meta;
      const auto boxes = GenerateAnchorBoxes(meta.Extent(), cfg.anchors);
      if (boxes.empty()) continue;
      auto feats = features.Features(meta, boxes);
      std::vector<Anchor> anchors(boxes.size());
      std::vector<double> scores(boxes.size());
      for (std::size_t a = 0; a < boxes.size(); ++a) {
        anchors[a] = Anchor{boxes[a], std::move(feats[a]), a};
        scores[a] = model.Forward(anchors[a].feature).p;
      }
      auto samples = MatchAndSample(boxes, objs.boxes, bgs, scores, cfg,
                                    DeriveSeed(image_seed, 2));
      ScoreSamples(model, anchors, samples);
      LossBreakdown loss;
      try {
        loss = TotalLoss(samples, cfg);
      } catch (const PreconditionError&) {
        continue;  // nothing to learn from this crop
      }
      if (!std::isfinite(loss.total) || loss.total > cfg.divergence_limit) {
        throw NumericError(fmt::format("training diverged at epoch {} (loss {})", epoch,
                                       loss.total));
      }
      const auto grad = LossGradient(model, anchors, samples, cfg);
      auto theta = model.mutable_params();
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= cfg.learning_rate * grad[k];
      acc.loss += loss.total;
      acc.cls_i += loss.cls_i;
      acc.cls_j += loss.cls_j;
      acc.cls_k += loss.cls_k;
      acc.reg += loss.reg;
      ++batches;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      acc.loss *= inv;
      acc.cls_i *= inv;
      acc.cls_j *= inv;
      acc.cls_k *= inv;
      acc.reg *= inv;
    }
    result.trace.push_back(acc);
  }
  return result;
}

std::string LossTraceCsv(std::span<const EpochLoss> trace) {
  std::string out = "epoch,loss,cls_i,cls_j,cls_k,reg\n";
  for (const auto& e : trace) {
    out += fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", e.epoch, e.loss, e.cls_i,
                       e.cls_j, e.cls_k, e.reg);
  }
  return out;
}

}  // namespace reeflabel
