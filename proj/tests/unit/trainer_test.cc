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

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "gradient_oracle.h"
#include "reeflabel/errors.h"

namespace reeflabel {
namespace {

using testing::FiniteDifferenceGradient;
using testing::MaxRelativeError;
using testing::RandomGradientInstance;

AnchorSample Sample(std::size_t anchor, AnchorRole role, double p) {
  AnchorSample s;
  s.anchor = anchor;
  s.role = role;
  s.p = p;
  s.p_star = role == AnchorRole::kPositiveI ? 1.0 : 0.0;
  if (role == AnchorRole::kPositiveI) {
    s.t = BoxDelta{};
    s.t_star = BoxDelta{};
  }
  return s;
}

TrainConfig BatchOf(int n) {
  TrainConfig cfg;
  cfg.minibatch_size = n;
  return cfg;
}

// --- matching -------------------------------------------------------------

TEST(MatchAndSampleTest, IgnoreNegativeAndBackgroundRoles) {
  const std::vector<BBox> anchors = {{0, 0, 40, 40}, {100, 0, 140, 40}, {200, 0, 240, 40}};
  const std::vector<BBox> backgrounds = {{200, 0, 240, 40}};
  const std::vector<double> scores = {0.95, 0.50, 0.99};
  const auto s = MatchAndSample(anchors, {}, backgrounds, scores, TrainConfig{}, 1);
  EXPECT_EQ(s[0].role, AnchorRole::kIgnored);
  EXPECT_EQ(s[1].role, AnchorRole::kNegativeK);
  EXPECT_EQ(s[2].role, AnchorRole::kLabeledBackgroundJ);
  EXPECT_EQ(s[2].p_star, 0.0);
  EXPECT_FALSE(s[2].t_star);
}

TEST(MatchAndSampleTest, IgnoreThresholdIsStrict) {
  const std::vector<BBox> anchors = {{0, 0, 40, 40}};
  const std::vector<double> at = {0.9};
  EXPECT_EQ(MatchAndSample(anchors, {}, {}, at, TrainConfig{}, 1)[0].role,
            AnchorRole::kNegativeK);
  TrainConfig off;
  off.ignore_rule = false;
  const std::vector<double> high = {0.99};
  EXPECT_EQ(MatchAndSample(anchors, {}, {}, high, off, 1)[0].role, AnchorRole::kNegativeK);
}

TEST(MatchAndSampleTest, ExactMatchIsPositiveWithZeroTarget) {
  const std::vector<BBox> anchors = {{10, 10, 50, 50}, {300, 300, 340, 340}};
  const std::vector<BBox> objects = {{10, 10, 50, 50}};
  const std::vector<double> scores = {0.2, 0.2};
  const auto s = MatchAndSample(anchors, objects, {}, scores, TrainConfig{}, 1);
  ASSERT_EQ(s[0].role, AnchorRole::kPositiveI);
  EXPECT_EQ(s[0].p_star, 1.0);
  for (int c = 0; c < 4; ++c) EXPECT_EQ((*s[0].t_star)[c], 0.0);
}

TEST(MatchAndSampleTest, BestAnchorIsPositiveEvenBelowThreshold) {
  const std::vector<BBox> anchors = {{0, 0, 40, 40}, {500, 0, 540, 40}};
  const std::vector<BBox> objects = {{0, 0, 60, 60}};  // IoU 0.44
  const std::vector<double> scores = {0.1, 0.1};
  const auto s = MatchAndSample(anchors, objects, {}, scores, TrainConfig{}, 1);
  EXPECT_EQ(s[0].role, AnchorRole::kPositiveI);
}

// Brute-force count: with everything fully separated, every background label
// is kept and negatives fill exactly the remaining capacity.
TEST(MatchAndSampleTest, BackgroundLabelsFillBeforeRandomNegatives) {
  std::vector<BBox> anchors, objects, backgrounds;
  auto cell = [](int i) {
    const double x = 50.0 * (i % 40), y = 50.0 * (i / 40);
    return BBox{x, y, x + 40, y + 40};
  };
  int next = 0;
  for (int i = 0; i < 2; ++i) objects.push_back(anchors.emplace_back(cell(next++)));
  for (int i = 0; i < 10; ++i) backgrounds.push_back(anchors.emplace_back(cell(next++)));
  for (int i = 0; i < 300; ++i) anchors.push_back(cell(next++));
  const std::vector<double> scores(anchors.size(), 0.3);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto s = MatchAndSample(anchors, objects, backgrounds, scores, TrainConfig{}, seed);
    std::map<AnchorRole, int> count;
    for (const auto& x : s) ++count[x.role];
    EXPECT_EQ(count[AnchorRole::kPositiveI], 2);
    EXPECT_EQ(count[AnchorRole::kLabeledBackgroundJ], 10);
    EXPECT_EQ(count[AnchorRole::kNegativeK], 246 - 2);
    EXPECT_EQ(count[AnchorRole::kUnused], 300 - 244);
  }
}

TEST(MatchAndSampleTest, SamplingIsSeeded) {
  std::vector<BBox> anchors;
  for (int i = 0; i < 400; ++i) anchors.push_back({i * 50.0, 0, i * 50.0 + 40, 40});
  const std::vector<double> scores(anchors.size(), 0.3);
  auto roles = [&](std::uint64_t seed) {
    std::vector<AnchorRole> r;
    for (const auto& s : MatchAndSample(anchors, {}, {}, scores, TrainConfig{}, seed)) {
      r.push_back(s.role);
    }
    return r;
  };
  EXPECT_EQ(roles(5), roles(5));
  EXPECT_NE(roles(5), roles(6));
}

TEST(MatchAndSampleTest, MisalignedScoresAreRejected) {
  const std::vector<BBox> anchors = {{0, 0, 4, 4}};
  const std::vector<double> scores = {0.1, 0.2};
  EXPECT_THROW(MatchAndSample(anchors, {}, {}, scores, TrainConfig{}, 1), PreconditionError);
  EXPECT_THROW(MatchAndSample({}, {}, {}, {}, TrainConfig{}, 1), PreconditionError);
}

TEST(MatchAndSampleTest, IgnoredAnchorsAreNeverForwarded) {
  std::vector<AnchorSample> s = {Sample(0, AnchorRole::kIgnored, 0.95),
                                 Sample(1, AnchorRole::kNegativeK, 0.2),
                                 Sample(2, AnchorRole::kUnused, 0.4)};
  EXPECT_EQ(ForwardableAnchors(s), (std::vector<std::size_t>{1, 2}));
}

TEST(AnchorGridTest, AnchorsStayInsideTheImage) {
  const auto boxes = GenerateAnchorBoxes({200, 100}, AnchorGridConfig{});
  EXPECT_FALSE(boxes.empty());
  for (const auto& b : boxes) {
    EXPECT_TRUE(b.IsValid());
    EXPECT_TRUE(Contains({0, 0, 200, 100}, b));
  }
}

// --- losses ----------------------------------------------------------------

TEST(LossTest, ClassificationExamples) {
  EXPECT_NEAR(ClassificationLoss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(ClassificationLoss(0.9, 0), -std::log(0.1), 1e-12);
  EXPECT_NEAR(ClassificationLoss(1.0 - 1e-7, 1), 0.0, 1e-6);
  // Clamped rather than infinite at the edges.
  EXPECT_TRUE(std::isfinite(ClassificationLoss(0.0, 1)));
  EXPECT_NEAR(ClassificationLoss(0.0, 1), -std::log(1e-7), 1e-9);
}

TEST(LossTest, SmoothL1Examples) {
  EXPECT_EQ(LocalizationLoss({0.1, 0.2, 0.3, 0.4}, {0.1, 0.2, 0.3, 0.4}), 0.0);
  EXPECT_NEAR(LocalizationLoss({0.5, 0, 0, 0}, {}), 0.125, 1e-12);
  EXPECT_NEAR(LocalizationLoss({0, 0, 2.0, 0}, {}), 1.5, 1e-12);
  EXPECT_NEAR(SmoothL1(-2.0), 1.5, 1e-12);
  EXPECT_THROW(LocalizationLoss({NAN, 0, 0, 0}, {}), PreconditionError);
}

TEST(LossTest, SinglePositive) {
  const std::vector<AnchorSample> s = {Sample(0, AnchorRole::kPositiveI, 0.5)};
  EXPECT_NEAR(TotalLoss(s, BatchOf(1)).total, std::log(2.0), 1e-12);
}

TEST(LossTest, MixedBatchMatchesHandComputation) {
  auto i = Sample(0, AnchorRole::kPositiveI, 0.8);
  i.t = BoxDelta{0.5, 0, 0, 0};
  const std::vector<AnchorSample> s = {i, Sample(1, AnchorRole::kLabeledBackgroundJ, 0.2),
                                       Sample(2, AnchorRole::kNegativeK, 0.3),
                                       Sample(3, AnchorRole::kIgnored, 0.99)};
  const double want =
      (-std::log(0.8) - std::log(0.8) - std::log(0.7)) / 4.0 + 0.5 * 0.5 * 0.5 / 4.0;
  const auto got = TotalLoss(s, BatchOf(4));
  EXPECT_NEAR(got.total, want, 1e-12);
  EXPECT_NEAR(got.total, 0.231989, 1e-5);
  EXPECT_EQ(got.active, 3u);
  EXPECT_NEAR(got.cls_i + got.cls_j + got.cls_k + got.reg, got.total, 1e-15);
  EXPECT_NEAR(got.reg, 0.125 / 4.0, 1e-15);
}

TEST(LossTest, BackgroundAndNegativesHaveNoLocalizationTerm) {
  auto j = Sample(0, AnchorRole::kLabeledBackgroundJ, 0.2);
  j.t = BoxDelta{5, 5, 5, 5};
  const std::vector<AnchorSample> s = {j};
  EXPECT_EQ(TotalLoss(s, BatchOf(1)).reg, 0.0);
}

TEST(LossTest, IgnoredOnlyBatch) {
  const std::vector<AnchorSample> s = {Sample(0, AnchorRole::kIgnored, 0.95)};
  EXPECT_THROW(TotalLoss(s, BatchOf(4)), PreconditionError);
  auto cfg = BatchOf(4);
  cfg.empty_batch = EmptyBatchPolicy::kZeroWithWarning;
  EXPECT_EQ(TotalLoss(s, cfg).total, 0.0);
  EXPECT_THROW(TotalLoss(s, BatchOf(0)), PreconditionError);
}

// --- gradients -------------------------------------------------------------

TEST(GradientTest, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  auto cfg = BatchOf(8);
  for (int trial = 0; trial < 25; ++trial) {
    auto inst = RandomGradientInstance(rng, 4, 8);
    ASSERT_EQ(inst.model.num_params(), 20u);
    const auto analytic = LossGradient(inst.model, inst.anchors, inst.samples, cfg);
    const auto numeric = FiniteDifferenceGradient(inst.model, inst.anchors, inst.samples, cfg, 1e-5);
    EXPECT_LT(MaxRelativeError(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(GradientTest, PerfectPredictionsGiveZeroGradient) {
  // Huge weight on a constant feature saturates p at the clamp.
  LinearLogisticModel model(1, {60.0, 0, 0, 0, 0});
  std::vector<Anchor> anchors = {{{0, 0, 10, 10}, {1.0}, 0}};
  auto s = Sample(0, AnchorRole::kPositiveI, 0.5);
  std::vector<AnchorSample> samples = {s};
  ScoreSamples(model, anchors, samples);
  const auto g = LossGradient(model, anchors, samples, BatchOf(1));
  double norm = 0.0;
  for (double v : g) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-6);
}

TEST(GradientTest, LambdaZeroLeavesRegressionParametersAlone) {
  std::mt19937_64 rng(3);
  auto inst = RandomGradientInstance(rng, 4, 8);
  auto cfg = BatchOf(8);
  cfg.lambda = 0.0;
  const auto g = LossGradient(inst.model, inst.anchors, inst.samples, cfg);
  for (std::size_t k = inst.model.regression_offset(); k < g.size(); ++k) EXPECT_EQ(g[k], 0.0);
}

TEST(GradientTest, IgnoredAnchorContributesExactlyZero) {
  LinearLogisticModel model(2, {2.0, 3.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1});
  // Anchor 1 sits on an unlabeled object; the model already scores it high.
  std::vector<Anchor> anchors = {{{0, 0, 40, 40}, {1.0, 0.0}, 0},
                                 {{100, 100, 140, 140}, {1.0, 1.0}, 1},
                                 {{300, 300, 340, 340}, {1.0, -3.0}, 2}};
  std::vector<double> scores;
  for (const auto& a : anchors) scores.push_back(model.Forward(a.feature).p);
  ASSERT_GT(scores[1], 0.9);
  const std::vector<BBox> boxes = {anchors[0].box, anchors[1].box, anchors[2].box};
  const std::vector<BBox> objects = {anchors[0].box};
  auto samples = MatchAndSample(boxes, objects, {}, scores, BatchOf(8), 1);
  ASSERT_EQ(samples[1].role, AnchorRole::kIgnored);
  ScoreSamples(model, anchors, samples);
  GradientTrace trace;
  LossGradient(model, anchors, samples, BatchOf(8), &trace);
  for (double v : trace.per_sample[1]) EXPECT_EQ(v, 0.0);
  double other = 0.0;
  for (double v : trace.per_sample[2]) other += std::abs(v);
  EXPECT_GT(other, 0.0);
}

TEST(GradientTest, NonFiniteGradientNamesTheParameter) {
  LinearLogisticModel model(2, {0, 0, 0, 0, 0, 0, 0, 0, 0, 0});
  std::vector<Anchor> anchors = {{{0, 0, 4, 4}, {1.0, 1e308}, 0}};
  auto s = Sample(0, AnchorRole::kPositiveI, 0.5);
  s.t_star = BoxDelta{1e308, 0, 0, 0};
  std::vector<AnchorSample> samples = {s};
  auto cfg = BatchOf(1);
  cfg.lambda = 10.0;  // 10 * 1e308 overflows
  try {
    LossGradient(model, anchors, samples, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("parameter"), std::string::npos);
  }
}

// --- augmentation ----------------------------------------------------------

TEST(AugmentTest, HorizontalFlipMirrors) {
  AugmentParams p;
  p.flip_horizontal = true;
  const std::vector<BBox> boxes = {{0, 0, 10, 10}};
  const auto r = ApplyAugment(ImageMeta::Identity("a", 100, 50), p, boxes, 0.25);
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.boxes[0], (BBox{90, 0, 100, 10}));
  p = {};
  p.flip_vertical = true;
  EXPECT_EQ(ApplyAugment(ImageMeta::Identity("a", 100, 50), p, boxes, 0.25).boxes[0],
            (BBox{0, 40, 10, 50}));
}

TEST(AugmentTest, FullCropAtOriginIsIdentity) {
  const std::vector<BBox> boxes = {{1, 2, 30, 40}, {50, 5, 99, 49}};
  const auto r = ApplyAugment(ImageMeta::Identity("a", 100, 50), AugmentParams{}, boxes, 0.25);
  EXPECT_EQ(r.boxes, boxes);
  EXPECT_EQ(r.meta.width, 100);
}

TEST(AugmentTest, CropDropsMostlyRemovedBoxes) {
  AugmentParams p;
  p.crop_ratio = 0.8;
  p.crop_x = 20;
  const std::vector<BBox> boxes = {{0, 0, 24, 10}, {10, 0, 30, 10}};
  const auto r = ApplyAugment(ImageMeta::Identity("a", 100, 50), p, boxes, 0.25);
  // First keeps 4/24 of its area, second 10/20.
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.kept[0], 1u);
  EXPECT_EQ(r.boxes[0], (BBox{0, 0, 10, 10}));
}

TEST(AugmentTest, DeterministicAndRangesRespected) {
  AugmentConfig cfg;
  std::mt19937_64 rng(8);
  std::vector<BBox> boxes;
  for (int i = 0; i < 20; ++i) {
    const double x = std::uniform_real_distribution<double>(0, 560)(rng);
    const double y = std::uniform_real_distribution<double>(0, 400)(rng);
    boxes.push_back({x, y, x + 60, y + 70});
  }
  const auto meta = ImageMeta::Identity("img", 640, 480);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto a = Augment(meta, boxes, cfg, seed);
    const auto b = Augment(meta, boxes, cfg, seed);
    EXPECT_EQ(a.boxes, b.boxes);
    const auto& p = a.meta.params;
    EXPECT_GE(p.crop_ratio, 0.8);
    EXPECT_LE(p.crop_ratio, 1.0);
    EXPECT_GE(p.brightness, 0.8);
    EXPECT_LE(p.brightness, 1.2);
    for (const auto& box : a.boxes) {
      EXPECT_TRUE(box.IsValid());
      EXPECT_TRUE(Contains({0, 0, a.meta.width, a.meta.height}, box));
    }
  }
}

// --- training --------------------------------------------------------------

struct Toy {
  std::map<std::string, std::vector<BBox>> truth;
  std::vector<TrainingImage> images;
};

// Objects sit exactly on grid anchors so features are separable. Every other
// object is left unlabeled when `half_labeled`.
Toy MakeToy(bool half_labeled) {
  Toy toy;
  TrainConfig cfg;
  const auto grid = GenerateAnchorBoxes({320, 240}, cfg.anchors);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 6; ++i) {
    const std::string id = "img" + std::to_string(i);
    TrainingImage img{ImageMeta::Identity(id, 320, 240), {}, {}};
    std::vector<BBox> objs;
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    for (int k = 0; k < 6; ++k) {
      const auto b = grid[pick(rng)];
      bool clash = false;
      for (const auto& o : objs) clash |= Iou(o, b) > 0.0;
      if (clash) continue;
      objs.push_back(b);
      if (!half_labeled || objs.size() % 2 == 1) img.objects.push_back(b);
    }
    toy.truth[id] = objs;
    toy.images.push_back(img);
  }
  return toy;
}

TrainConfig ToyConfig() {
  TrainConfig cfg;
  cfg.augment.enabled = false;
  cfg.learning_rate = 5.0;
  return cfg;
}

// Mean p over anchors on every true object, labeled or not.
double MeanObjectScore(const ScoringModel& model, const Toy& toy,
                       const testing::ToyFeatureSource& src) {
  double sum = 0.0;
  int n = 0;
  for (const auto& img : toy.images) {
    const auto& objs = toy.truth.at(img.meta.image_id);
    const auto feats = src.Features(img.meta, objs);
    for (const auto& f : feats) {
      sum += model.Forward(f).p;
      ++n;
    }
  }
  return sum / n;
}

TEST(TrainEpochsTest, SeparableToyReachesHighConfidence) {
  const auto toy = MakeToy(false);
  testing::ToyFeatureSource src(toy.truth);
  LinearLogisticModel model(2);
  const auto result = TrainEpochs(model, toy.images, src, ToyConfig(), 200, 4);
  ASSERT_EQ(result.trace.size(), 200u);
  EXPECT_GT(MeanObjectScore(model, toy, src), 0.9);
  EXPECT_LT(result.trace.back().loss, result.trace.front().loss);
}

TEST(TrainEpochsTest, LossTraceDecreasesInMovingAverage) {
  const auto toy = MakeToy(false);
  testing::ToyFeatureSource src(toy.truth);
  LinearLogisticModel model(2);
  const auto trace = TrainEpochs(model, toy.images, src, ToyConfig(), 60, 4).trace;
  const std::size_t w = 5;
  double prev = 1e300;
  for (std::size_t e = 0; e + w <= trace.size(); e += w) {
    double avg = 0.0;
    for (std::size_t k = e; k < e + w; ++k) avg += trace[k].loss;
    avg /= w;
    EXPECT_LE(avg, prev + 1e-12) << "window at epoch " << e;
    prev = avg;
  }
}

// The previous model already finds every object; retraining on half the labels
// must not teach it to call the unlabeled ones background.
TEST(TrainEpochsTest, IgnoreRuleProtectsUnlabeledObjects) {
  const auto full = MakeToy(false);
  const auto half = MakeToy(true);
  testing::ToyFeatureSource src(full.truth);
  LinearLogisticModel previous(2);
  TrainEpochs(previous, full.images, src, ToyConfig(), 200, 3);
  ASSERT_GT(MeanObjectScore(previous, full, src), 0.9);

  LinearLogisticModel with = previous, without = previous;
  auto cfg = ToyConfig();
  TrainEpochs(with, half.images, src, cfg, 150, 9);
  cfg.ignore_rule = false;
  TrainEpochs(without, half.images, src, cfg, 150, 9);
  const double kept = MeanObjectScore(with, full, src);
  const double lost = MeanObjectScore(without, full, src);
  EXPECT_LT(lost, kept);
  EXPECT_GT(kept, 0.9);
}

TEST(TrainEpochsTest, ZeroEpochsLeavesModelUnchanged) {
  const auto toy = MakeToy(false);
  testing::ToyFeatureSource src(toy.truth);
  LinearLogisticModel model(2, {0.3, -0.2, 0.1, 0, 0, 0, 0, 0, 0, 0.5});
  const std::vector<double> before(model.params().begin(), model.params().end());
  EXPECT_TRUE(TrainEpochs(model, toy.images, src, ToyConfig(), 0, 1).trace.empty());
  EXPECT_EQ(std::vector<double>(model.params().begin(), model.params().end()), before);
}

TEST(TrainEpochsTest, NeedsALabeledObject) {
  auto toy = MakeToy(false);
  for (auto& img : toy.images) img.objects.clear();
  testing::ToyFeatureSource src(toy.truth);
  LinearLogisticModel model(2);
  EXPECT_THROW(TrainEpochs(model, toy.images, src, ToyConfig(), 1, 1), PreconditionError);
}

TEST(TrainEpochsTest, DivergenceAborts) {
  const auto toy = MakeToy(false);
  testing::ToyFeatureSource src(toy.truth);
  LinearLogisticModel model(2);
  auto cfg = ToyConfig();
  cfg.divergence_limit = 1e-3;
  EXPECT_THROW(TrainEpochs(model, toy.images, src, cfg, 1, 1), NumericError);
}

TEST(TrainConfigTest, RangesAreValidated) {
  TrainConfig cfg;
  cfg.ignore_threshold = 1.0;
  EXPECT_THROW(Validate(cfg), ConfigError);
  cfg = {};
  cfg.minibatch_size = 0;
  EXPECT_THROW(Validate(cfg), ConfigError);
  cfg = {};
  cfg.lambda = -1;
  EXPECT_THROW(Validate(cfg), ConfigError);
  EXPECT_NO_THROW(Validate(TrainConfig{}));
}

TEST(LossTraceCsvTest, Header) {
  const std::vector<EpochLoss> trace = {{1, 0.5, 0.1, 0.1, 0.2, 0.1}};
  const auto csv = LossTraceCsv(trace);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,loss,cls_i,cls_j,cls_k,reg");
}

}  // namespace
}  // namespace reeflabel
