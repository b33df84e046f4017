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

#include "reeflabel/metrics.h"

#include <algorithm>
#include <tuple>

#include <spdlog/spdlog.h>

#include "reeflabel/errors.h"

namespace reeflabel {

double AveragePrecisionFromRanks(const std::vector<bool>& is_tp, int truths) {
  if (truths <= 0) throw PreconditionError("AP is undefined without truths");
  const std::size_t n = is_tp.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (is_tp[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(truths);
  }
  // Precision envelope, right to left.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return ap;
}

Evaluation Evaluate(const DetectionsByImage& detections, const TruthsByImage& truths,
                    const std::vector<std::string>& classes, double iou_threshold,
                    double score_threshold) {
  Evaluation out;
  double ap_sum = 0.0;
  int ap_count = 0;
  for (const auto& cls : classes) {
    auto& ce = out.classes[cls];
    struct Ranked {
      double score;
      std::string image;
      std::size_t index;
    };
    std::vector<Ranked> ranked;
    for (const auto& [image, list] : detections) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].class_label == cls) ranked.push_back({list[i].score, image, i});
      }
    }
    std::map<std::string, std::vector<bool>> used;
    for (const auto& [image, list] : truths) {
      auto& flags = used[image];
      flags.assign(list.size(), false);
      for (const auto& t : list) {
        if (t.class_label == cls) ++ce.truths;
      }
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      return std::tie(b.score, a.image, a.index) < std::tie(a.score, b.image, b.index);
    });
    std::vector<bool> flags;
    flags.reserve(ranked.size());
    for (const auto& r : ranked) {
      const auto& det = detections.at(r.image)[r.index];
      bool tp = false;
      auto tit = truths.find(r.image);
      if (tit != truths.end()) {
        double best = iou_threshold;
        int best_idx = -1;
        for (std::size_t t = 0; t < tit->second.size(); ++t) {
          const auto& truth = tit->second[t];
          if (truth.class_label != cls || used[r.image][t]) continue;
          const double v = Iou(det.box, truth.box);
          if (v >= best) {
            best = v;
            best_idx = static_cast<int>(t);
          }
        }
        if (best_idx >= 0) {
          used[r.image][static_cast<std::size_t>(best_idx)] = true;
          tp = true;
        }
      }
      flags.push_back(tp);
      ++ce.detections;
      if (det.score >= score_threshold) {
        ++ce.published;
        if (tp) ++ce.published_true;
      }
    }
    if (ce.published > 0) {
      ce.precision = static_cast<double>(ce.published_true) / ce.published;
    }
    if (ce.truths > 0) {
      ce.ap = AveragePrecisionFromRanks(flags, ce.truths);
      ap_sum += *ce.ap;
      ++ap_count;
    } else {
      spdlog::warn("class '{}' has no ground truth; AP undefined and excluded from mAP", cls);
    }
  }
  if (ap_count > 0) out.map = ap_sum / ap_count;
  return out;
}

TruthsByImage TruthsFromWorld(const HiddenWorld& world, const std::vector<std::string>& images) {
  TruthsByImage out;
  for (const auto& id : images) {
    auto& list = out[id];
    for (const auto& o : world.ObjectsOn(id)) list.push_back({o.box, o.class_label});
  }
  return out;
}

bool HasConverged(const std::vector<double>& delta_ratios, double epsilon, int patience) {
  if (patience < 1) throw PreconditionError("patience must be >= 1");
  if (delta_ratios.size() < static_cast<std::size_t>(patience)) return false;
  return std::all_of(delta_ratios.end() - patience, delta_ratios.end(),
                     [&](double d) { return d < epsilon; });
}

}  // namespace reeflabel
