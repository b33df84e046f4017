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

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "reeflabel/geometry.h"
#include "reeflabel/trainer.h"

namespace reeflabel {
namespace {

std::vector<BBox> RandomBoxes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, 900.0);
  std::uniform_real_distribution<double> size(8.0, 120.0);
  std::vector<BBox> boxes;
  boxes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    boxes.push_back(BBox::FromXywh(pos(rng), pos(rng), size(rng), size(rng)));
  }
  return boxes;
}

void BM_Iou(benchmark::State& state) {
  const auto a = RandomBoxes(1024, 1);
  const auto b = RandomBoxes(1024, 2);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(Iou(a[i & 1023], b[i & 1023]));
    ++i;
  }
}
BENCHMARK(BM_Iou);

// Anchors with random features and a sample set that mixes positives with
// regression targets and negatives.
struct Batch {
  LinearLogisticModel model;
  std::vector<Anchor> anchors;
  std::vector<AnchorSample> samples;
};

Batch MakeBatch(std::size_t count, std::size_t dim) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 0.5);
  std::vector<double> theta(5 * dim);
  for (auto& v : theta) v = gauss(rng);
  Batch batch{LinearLogisticModel(dim, theta), {}, {}};
  for (std::size_t s = 0; s < count; ++s) {
    Anchor a;
    a.box = {0, 0, 32, 32};
    a.grid_index = s;
    a.feature.resize(dim);
    for (auto& v : a.feature) v = gauss(rng);
    a.feature[0] = 1.0;
    batch.anchors.push_back(a);

    AnchorSample smp;
    smp.anchor = s;
    if (s % 2 == 0) {
      smp.role = AnchorRole::kPositiveI;
      smp.p_star = 1.0;
      smp.t_star = BoxDelta{gauss(rng), gauss(rng), gauss(rng), gauss(rng)};
    } else {
      smp.role = AnchorRole::kNegativeK;
    }
    batch.samples.push_back(smp);
  }
  ScoreSamples(batch.model, batch.anchors, batch.samples);
  return batch;
}

void BM_TotalLoss(benchmark::State& state) {
  const auto batch = MakeBatch(static_cast<std::size_t>(state.range(0)), 16);
  TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(TotalLoss(batch.samples, cfg));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TotalLoss)->Arg(256)->Arg(1024);

void BM_LossGradient(benchmark::State& state) {
  const auto batch = MakeBatch(static_cast<std::size_t>(state.range(0)), 16);
  TrainConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(LossGradient(batch.model, batch.anchors, batch.samples, cfg));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossGradient)->Arg(256)->Arg(1024);

void BM_MatchAndSample(benchmark::State& state) {
  const auto anchors = GenerateAnchorBoxes({1024, 1024}, AnchorGridConfig{});
  const auto objects = RandomBoxes(static_cast<std::size_t>(state.range(0)), 3);
  const std::vector<BBox> background = RandomBoxes(4, 4);
  const std::vector<double> scores(anchors.size(), 0.4);
  TrainConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(MatchAndSample(anchors, objects, background, scores, cfg, 11));
  }
}
BENCHMARK(BM_MatchAndSample)->Arg(8)->Arg(64);

}  // namespace
}  // namespace reeflabel

BENCHMARK_MAIN();
