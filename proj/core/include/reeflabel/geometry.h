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

#include <optional>
#include <string>

namespace reeflabel {

// Axis-aligned rectangle in image pixel coordinates, origin top-left.
// Valid boxes have finite coordinates and strictly positive area.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double Width() const { return x_max - x_min; }
  double Height() const { return y_max - y_min; }
  double Area() const { return Width() * Height(); }
  double CenterX() const { return 0.5 * (x_min + x_max); }
  double CenterY() const { return 0.5 * (y_min + y_max); }
  bool IsValid() const;

  // COCO-style [x, y, width, height] conversion.
  static BBox FromXywh(double x, double y, double w, double h) {
    return BBox{x, y, x + w, y + h};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct ImageExtent {
  double width = 0.0;
  double height = 0.0;
};

struct Dot {
  double x = 0.0;
  double y = 0.0;
  std::string class_label;
};

// Anchor-relative box parameterization: center offsets normalized by the
// anchor size, log width/height ratios.
struct BoxDelta {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;

  double& operator[](int i);
  double operator[](int i) const;

  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

inline constexpr double kDefaultSeedHalfExtent = 40.0;

// Throws PreconditionError if `box` violates the BBox invariants.
void ValidateBox(const BBox& box);

double IntersectionArea(const BBox& a, const BBox& b);

// Intersection over union. Both boxes must be valid.
double Iou(const BBox& a, const BBox& b);

bool Contains(const BBox& outer, const BBox& inner);
bool ContainsPoint(const BBox& box, double x, double y);

// Clips to [0,w]x[0,h]. Returns nullopt when clipping collapses a side.
std::optional<BBox> ClipBox(const BBox& box, const ImageExtent& extent);

// Square box of side 2*half_extent centered on the dot, clipped to the image.
// Throws RejectedRecordError for dots outside the image or degenerate clips.
BBox DotToSeedBox(const Dot& dot, double half_extent, const ImageExtent& extent);

BoxDelta EncodeDelta(const BBox& anchor, const BBox& target);
BBox DecodeDelta(const BBox& anchor, const BoxDelta& delta);

std::string ToString(const BBox& box);

}  // namespace reeflabel
