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

#include "reeflabel/geometry.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "reeflabel/errors.h"

namespace reeflabel {

bool BBox::IsValid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_min < x_max && y_min < y_max;
}

double& BoxDelta::operator[](int i) {
  switch (i) {
    case 0: return tx;
    case 1: return ty;
    case 2: return tw;
    default: return th;
  }
}

double BoxDelta::operator[](int i) const {
  return const_cast<BoxDelta&>(*this)[i];
}

void ValidateBox(const BBox& box) {
  if (!box.IsValid()) {
    throw PreconditionError("invalid box " + ToString(box));
  }
}

double IntersectionArea(const BBox& a, const BBox& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double Iou(const BBox& a, const BBox& b) {
  ValidateBox(a);
  ValidateBox(b);
  const double inter = IntersectionArea(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.Area() + b.Area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool Contains(const BBox& outer, const BBox& inner) {
  return inner.x_min >= outer.x_min && inner.y_min >= outer.y_min &&
         inner.x_max <= outer.x_max && inner.y_max <= outer.y_max;
}

bool ContainsPoint(const BBox& box, double x, double y) {
  return x >= box.x_min && x <= box.x_max && y >= box.y_min && y <= box.y_max;
}

std::optional<BBox> ClipBox(const BBox& box, const ImageExtent& extent) {
  BBox out{std::clamp(box.x_min, 0.0, extent.width),
           std::clamp(box.y_min, 0.0, extent.height),
           std::clamp(box.x_max, 0.0, extent.width),
           std::clamp(box.y_max, 0.0, extent.height)};
  if (!out.IsValid()) return std::nullopt;
  return out;
}

BBox DotToSeedBox(const Dot& dot, double half_extent, const ImageExtent& extent) {
  if (!(half_extent > 0.0) || !std::isfinite(half_extent)) {
    throw PreconditionError(fmt::format("half_extent must be > 0, got {}", half_extent));
  }
  if (!std::isfinite(dot.x) || !std::isfinite(dot.y) || dot.x < 0.0 ||
      dot.y < 0.0 || dot.x > extent.width || dot.y > extent.height) {
    throw RejectedRecordError(fmt::format("dot ({}, {}) outside image {}x{}", dot.x,
                                          dot.y, extent.width, extent.height));
  }
  const BBox raw{dot.x - half_extent, dot.y - half_extent, dot.x + half_extent,
                 dot.y + half_extent};
  auto clipped = ClipBox(raw, extent);
  if (!clipped) {
    throw RejectedRecordError(
        fmt::format("seed box for dot ({}, {}) collapses after clipping", dot.x, dot.y));
  }
  return *clipped;
}

BoxDelta EncodeDelta(const BBox& anchor, const BBox& target) {
  ValidateBox(anchor);
  ValidateBox(target);
  const double aw = anchor.Width();
  const double ah = anchor.Height();
  return BoxDelta{(target.CenterX() - anchor.CenterX()) / aw,
                  (target.CenterY() - anchor.CenterY()) / ah,
                  std::log(target.Width() / aw), std::log(target.Height() / ah)};
}

BBox DecodeDelta(const BBox& anchor, const BoxDelta& delta) {
  ValidateBox(anchor);
  const double aw = anchor.Width();
  const double ah = anchor.Height();
  const double cx = anchor.CenterX() + delta.tx * aw;
  const double cy = anchor.CenterY() + delta.ty * ah;
  const double w = aw * std::exp(delta.tw);
  const double h = ah * std::exp(delta.th);
  return BBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

std::string ToString(const BBox& box) {
  return fmt::format("({}, {}, {}, {})", box.x_min, box.y_min, box.x_max, box.y_max);
}

}  // namespace reeflabel
