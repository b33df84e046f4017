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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reeflabel/detector.h"

namespace reeflabel {

struct GroundTruth {
  BBox box;
  std::string class_label;
};

using DetectionsByImage = std::map<std::string, std::vector<Detection>>;
using TruthsByImage = std::map<std::string, std::vector<GroundTruth>>;

struct ClassEvaluation {
  int truths = 0;
  int detections = 0;           // all scored detections of this class
  int published = 0;            // detections at or above the score threshold
  int published_true = 0;       // of which matched a truth
  std::optional<double> ap;     // undefined without truths
  std::optional<double> precision;  // undefined without published detections
};

struct Evaluation {
  std::map<std::string, ClassEvaluation> classes;
  // Unweighted mean over classes with a defined AP.
  std::optional<double> map;
};

// All-point interpolated AP over a ranked list of true/false-positive flags.
double AveragePrecisionFromRanks(const std::vector<bool>& is_true_positive, int truths);

// Per-class AP@iou (greedy one-to-one matching in score order) and precision
// of the detections scoring >= score_threshold. Classes with zero truths get
// no AP and are excluded from the mean with a warning.
Evaluation Evaluate(const DetectionsByImage& detections, const TruthsByImage& truths,
                    const std::vector<std::string>& classes, double iou_threshold = 0.5,
                    double score_threshold = 0.5);

TruthsByImage TruthsFromWorld(const HiddenWorld& world, const std::vector<std::string>& images);

// True once the last `patience` delta ratios are all below epsilon.
bool HasConverged(const std::vector<double>& delta_ratios, double epsilon, int patience);

}  // namespace reeflabel
