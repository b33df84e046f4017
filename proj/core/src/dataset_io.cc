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

// Box-JSON and dot-CSV ingestion/export on top of the event-sourced store.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reeflabel/errors.h"
#include "reeflabel/labelstore.h"

namespace reeflabel {

using nlohmann::json;

namespace {

std::string IdField(const json& record, const char* key, const std::string& where) {
  if (!record.contains(key)) throw ImportError(fmt::format("{}: missing '{}'", where, key));
  const auto& v = record[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw ImportError(fmt::format("{}: '{}' must be a string or integer", where, key));
}

double NumberField(const json& record, const char* key, const std::string& where) {
  if (!record.contains(key) || !record[key].is_number()) {
    throw ImportError(fmt::format("{}: '{}' must be a number", where, key));
  }
  return record[key].get<double>();
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> SplitCsvLine(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      return fields;
    }
    fields.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

double ParseDouble(std::string_view s, const std::string& where) {
  // std::from_chars for double is available in libstdc++ 11.
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw ImportError(fmt::format("{}: '{}' is not a number", where, s));
  }
  return v;
}

}  // namespace

ImportSummary ImportBoxes(Transaction& tx, const json& document) {
  if (!document.is_object()) throw ImportError("box-JSON document must be an object");
  if (document.value("hidden", false)) {
    throw ImportError("refusing to load a hidden-world file into the label store");
  }
  for (const char* key : {"images", "categories", "annotations"}) {
    if (!document.contains(key) || !document[key].is_array()) {
      throw ImportError(fmt::format("box-JSON: '{}' must be an array", key));
    }
  }
  ImportSummary summary;

  std::map<std::string, std::string> category_names;
  for (std::size_t i = 0; i < document["categories"].size(); ++i) {
    const auto& c = document["categories"][i];
    const auto where = fmt::format("categories[{}]", i);
    const auto id = IdField(c, "id", where);
    if (!c.contains("name") || !c["name"].is_string()) {
      throw ImportError(fmt::format("{}: missing 'name'", where));
    }
    const auto name = c["name"].get<std::string>();
    if (!category_names.emplace(id, name).second) {
      throw ImportError(fmt::format("{}: duplicate category id '{}'", where, id));
    }
    if (!IsBackground(name) && !tx.dataset().catalog().Contains(name)) {
      tx.Apply(ClassAdded{name});
    }
  }

  std::set<std::string> doc_images;
  for (std::size_t i = 0; i < document["images"].size(); ++i) {
    const auto& im = document["images"][i];
    const auto where = fmt::format("images[{}]", i);
    ImageRecord rec;
    rec.image_id = IdField(im, "id", where);
    rec.width = NumberField(im, "width", where);
    rec.height = NumberField(im, "height", where);
    if (im.contains("uri")) {
      rec.uri = im["uri"].get<std::string>();
    } else if (im.contains("file_name")) {
      rec.uri = im["file_name"].get<std::string>();
    }
    rec.split = im.contains("split") ? ParseSplit(im["split"].get<std::string>())
                                     : Split::kPool;
    if (!doc_images.insert(rec.image_id).second) {
      throw ImportError(fmt::format("{}: duplicate image id '{}'", where, rec.image_id));
    }
    if (!(rec.width > 0.0) || !(rec.height > 0.0)) {
      throw ImportError(fmt::format("{}: width and height must be > 0", where));
    }
    if (const auto* existing = tx.dataset().FindImage(rec.image_id)) {
      if (!(*existing == rec)) {
        throw ImportError(fmt::format("{}: image '{}' conflicts with the store", where,
                                      rec.image_id));
      }
      continue;
    }
    tx.Apply(ImageAdded{rec});
    ++summary.images;
  }

  std::set<std::string> doc_annotations;
  for (std::size_t i = 0; i < document["annotations"].size(); ++i) {
    const auto& a = document["annotations"][i];
    const auto where = fmt::format("annotations[{}]", i);
    Annotation ann;
    ann.ann_id = IdField(a, "id", where);
    ann.image_id = IdField(a, "image_id", where);
    const auto cat = IdField(a, "category_id", where);
    auto cit = category_names.find(cat);
    if (cit == category_names.end()) {
      throw ImportError(fmt::format("{}: unknown category_id '{}'", where, cat));
    }
    if (IsBackground(cit->second)) {
      throw ImportError(fmt::format("{}: seed annotations cannot be Background", where));
    }
    ann.class_label = cit->second;
    if (!a.contains("bbox") || !a["bbox"].is_array() || a["bbox"].size() != 4) {
      throw ImportError(fmt::format("{}: 'bbox' must be [x, y, w, h]", where));
    }
    const auto& b = a["bbox"];
    for (const auto& v : b) {
      if (!v.is_number()) throw ImportError(fmt::format("{}: bbox values must be numbers", where));
    }
    const BBox raw = BBox::FromXywh(b[0].get<double>(), b[1].get<double>(),
                                    b[2].get<double>(), b[3].get<double>());
    if (!raw.IsValid()) {
      throw ImportError(
          fmt::format("{}: invalid box {} (non-positive area)", where, ToString(raw)));
    }
    const auto* image = tx.dataset().FindImage(ann.image_id);
    if (image == nullptr) {
      throw ImportError(fmt::format("{}: unknown image_id '{}'", where, ann.image_id));
    }
    auto clipped = ClipBox(raw, image->Extent());
    if (!clipped) {
      throw ImportError(fmt::format("{}: box {} lies outside image '{}'", where,
                                    ToString(raw), ann.image_id));
    }
    ann.box = *clipped;
    if (a.contains("score") && a["score"].is_number()) ann.score = a["score"].get<double>();
    ann.state = AnnotationState::kSeed;
    if (!doc_annotations.insert(ann.ann_id).second ||
        tx.dataset().FindAnnotation(ann.ann_id) != nullptr) {
      throw ImportError(fmt::format("{}: duplicate annotation id '{}'", where, ann.ann_id));
    }
    tx.Apply(AnnotationCreated{std::move(ann)});
    ++summary.annotations;
  }
  return summary;
}

ImportSummary ImportDots(Transaction& tx, std::string_view csv, double half_extent) {
  if (!(half_extent > 0.0)) throw PreconditionError("half_extent must be > 0");
  struct Row {
    std::size_t line;
    std::string image_id;
    double x, y;
    std::string class_label;
  };
  std::vector<Row> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_seen = false;
  while (pos < csv.size()) {
    auto nl = csv.find('\n', pos);
    if (nl == std::string_view::npos) nl = csv.size();
    auto line = Trim(csv.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (!header_seen) {
      if (line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
      if (line != "image_id,x,y,class_label") {
        throw ImportError(fmt::format(
            "dot-CSV: expected header 'image_id,x,y,class_label', got '{}'", line));
      }
      header_seen = true;
      continue;
    }
    const auto where = fmt::format("dot-CSV line {}", line_no);
    auto fields = SplitCsvLine(line);
    if (fields.size() != 4) {
      throw ImportError(fmt::format("{}: expected 4 fields, got {}", where, fields.size()));
    }
    rows.push_back(Row{line_no, std::string(fields[0]), ParseDouble(fields[1], where),
                       ParseDouble(fields[2], where), std::string(fields[3])});
  }
  if (!header_seen) throw ImportError("dot-CSV: missing header");

  std::set<std::string> unknown;
  for (const auto& r : rows) {
    if (!tx.dataset().catalog().Contains(r.class_label)) unknown.insert(r.class_label);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw ImportError(fmt::format("dot-CSV: unknown classes: {}", list));
  }

  ImportSummary summary;
  std::size_t counter = tx.dataset().annotations().size();
  for (const auto& r : rows) {
    const auto* image = tx.dataset().FindImage(r.image_id);
    if (image == nullptr) {
      throw ImportError(
          fmt::format("dot-CSV line {}: unknown image '{}'", r.line, r.image_id));
    }
    BBox box;
    try {
      box = DotToSeedBox(Dot{r.x, r.y, r.class_label}, half_extent, image->Extent());
    } catch (const RejectedRecordError& e) {
      auto msg = fmt::format("dot-CSV line {}: skipped: {}", r.line, e.what());
      spdlog::warn("{}", msg);
      summary.warnings.push_back(std::move(msg));
      ++summary.skipped;
      continue;
    }
    Annotation ann;
    do {
      ann.ann_id = fmt::format("dot-{:07d}", counter++);
    } while (tx.dataset().FindAnnotation(ann.ann_id) != nullptr);
    ann.image_id = r.image_id;
    ann.class_label = r.class_label;
    ann.box = box;
    ann.state = AnnotationState::kPredicted;
    tx.Apply(AnnotationCreated{std::move(ann)});
    ++summary.annotations;
  }
  return summary;
}

void ApplyReviewOutcome(Transaction& tx, const std::string& ann_id,
                        const ReviewDecision& decision, const ReviewEvent& review) {
  tx.Apply(ReviewApplied{ann_id, decision, review});
}

json ExportBoxes(const Dataset& dataset, const ExportOptions& options) {
  json images = json::array();
  for (const auto& [id, im] : dataset.images()) {
    images.push_back(json{{"id", id},
                          {"width", im.width},
                          {"height", im.height},
                          {"uri", im.uri},
                          {"split", std::string(ToString(im.split))}});
  }
  json categories = json::array();
  if (options.include_background) {
    categories.push_back(json{{"id", 0}, {"name", std::string(kBackground)}});
  }
  const auto& names = dataset.catalog().names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    categories.push_back(json{{"id", i + 1}, {"name", names[i]}});
  }

  std::vector<const Annotation*> selected;
  for (const auto& [_, a] : dataset.annotations()) {
    if (!options.states.count(a.state)) continue;
    if (IsBackground(a.class_label) && !options.include_background) continue;
    selected.push_back(&a);
  }
  std::sort(selected.begin(), selected.end(), [](const Annotation* a, const Annotation* b) {
    return std::tie(a->image_id, a->ann_id) < std::tie(b->image_id, b->ann_id);
  });
  json annotations = json::array();
  for (const auto* a : selected) {
    const int cat = IsBackground(a->class_label) ? 0 : dataset.catalog().IndexOf(a->class_label) + 1;
    json rec{{"id", a->ann_id},
             {"image_id", a->image_id},
             {"category_id", cat},
             {"bbox", json::array({a->box.x_min, a->box.y_min, a->box.Width(),
                                   a->box.Height()})},
             {"state", std::string(ToString(a->state))}};
    if (a->score) rec["score"] = *a->score;
    annotations.push_back(std::move(rec));
  }
  return json{{"images", std::move(images)},
              {"categories", std::move(categories)},
              {"annotations", std::move(annotations)}};
}

std::string SerializeBoxes(const json& document) { return document.dump(2) + "\n"; }

std::map<std::string, int> ClassCounts(const Dataset& dataset,
                                       const std::set<AnnotationState>& states) {
  std::map<std::string, int> counts;
  for (const auto& name : dataset.catalog().names()) counts[name] = 0;
  counts[std::string(kBackground)] = 0;
  for (const auto& [_, a] : dataset.annotations()) {
    if (states.count(a.state)) ++counts[a.class_label];
  }
  return counts;
}

}  // namespace reeflabel
