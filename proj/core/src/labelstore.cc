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

#include "reeflabel/labelstore.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reeflabel/errors.h"

namespace reeflabel {

using nlohmann::json;

namespace {

constexpr std::pair<AnnotationState, std::string_view> kStateNames[] = {
    {AnnotationState::kSeed, "seed"},
    {AnnotationState::kPredicted, "predicted"},
    {AnnotationState::kPendingReview, "pending_review"},
    {AnnotationState::kApproved, "approved"},
    {AnnotationState::kBackgroundConfirmed, "background_confirmed"},
    {AnnotationState::kRepublished, "republished"},
    {AnnotationState::kRejected, "rejected"},
};

json BoxToJson(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

BBox BoxFromJson(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ImportError("box must be a 4-element array");
  return BBox{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>()};
}

std::string IdToString(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  throw ImportError("id must be a string or integer, got " + j.dump());
}

json ImageToJson(const ImageRecord& im) {
  return json{{"id", im.image_id},
              {"width", im.width},
              {"height", im.height},
              {"uri", im.uri},
              {"split", std::string(ToString(im.split))}};
}

ImageRecord ImageFromJson(const json& j) {
  ImageRecord im;
  im.image_id = IdToString(j.at("id"));
  im.width = j.at("width").get<double>();
  im.height = j.at("height").get<double>();
  if (j.contains("uri")) {
    im.uri = j["uri"].get<std::string>();
  } else if (j.contains("file_name")) {
    im.uri = j["file_name"].get<std::string>();
  }
  im.split = j.contains("split") ? ParseSplit(j["split"].get<std::string>()) : Split::kPool;
  return im;
}

json ReviewToJson(const ReviewEvent& r) {
  return json{{"worker_id", r.worker_id},
              {"box", BoxToJson(r.submitted_box)},
              {"selected_class", r.selected_class},
              {"gold_passed", r.gold_passed ? json(*r.gold_passed) : json(nullptr)},
              {"timestamp", r.timestamp}};
}

ReviewEvent ReviewFromJson(const json& j) {
  ReviewEvent r;
  r.worker_id = j.at("worker_id").get<std::string>();
  r.submitted_box = BoxFromJson(j.at("box"));
  r.selected_class = j.at("selected_class").get<std::string>();
  if (!j.at("gold_passed").is_null()) r.gold_passed = j["gold_passed"].get<bool>();
  r.timestamp = j.at("timestamp").get<std::int64_t>();
  return r;
}

json AnnotationToJson(const Annotation& a) {
  json j{{"id", a.ann_id},
         {"image_id", a.image_id},
         {"class", a.class_label},
         {"box", BoxToJson(a.box)},
         {"state", std::string(ToString(a.state))},
         {"score", a.score ? json(*a.score) : json(nullptr)},
         {"publish_count", a.publish_count}};
  json history = json::array();
  for (const auto& r : a.history) history.push_back(ReviewToJson(r));
  j["history"] = std::move(history);
  return j;
}

Annotation AnnotationFromJson(const json& j) {
  Annotation a;
  a.ann_id = j.at("id").get<std::string>();
  a.image_id = j.at("image_id").get<std::string>();
  a.class_label = j.at("class").get<std::string>();
  a.box = BoxFromJson(j.at("box"));
  a.state = ParseAnnotationState(j.at("state").get<std::string>());
  if (j.contains("score") && !j["score"].is_null()) a.score = j["score"].get<double>();
  a.publish_count = j.value("publish_count", 0);
  if (j.contains("history")) {
    for (const auto& r : j["history"]) a.history.push_back(ReviewFromJson(r));
  }
  return a;
}

std::string_view DecisionKindName(ReviewDecision::Kind k) {
  switch (k) {
    case ReviewDecision::Kind::kFinalize: return "finalize";
    case ReviewDecision::Kind::kRepublish: return "republish";
    case ReviewDecision::Kind::kReject: return "reject";
  }
  return "reject";
}

ReviewDecision::Kind ParseDecisionKind(std::string_view s) {
  if (s == "finalize") return ReviewDecision::Kind::kFinalize;
  if (s == "republish") return ReviewDecision::Kind::kRepublish;
  if (s == "reject") return ReviewDecision::Kind::kReject;
  throw ImportError(fmt::format("unknown decision kind '{}'", s));
}

bool CreatableState(AnnotationState s) {
  return s == AnnotationState::kSeed || s == AnnotationState::kPredicted;
}

}  // namespace

std::string_view ToString(Split split) {
  switch (split) {
    case Split::kSeed: return "seed";
    case Split::kPool: return "pool";
    case Split::kValidation: return "validation";
  }
  return "pool";
}

std::string_view ToString(AnnotationState state) {
  for (const auto& [s, name] : kStateNames) {
    if (s == state) return name;
  }
  return "unknown";
}

Split ParseSplit(std::string_view name) {
  if (name == "seed") return Split::kSeed;
  if (name == "pool") return Split::kPool;
  if (name == "validation") return Split::kValidation;
  throw ImportError(fmt::format("unknown split '{}'", name));
}

AnnotationState ParseAnnotationState(std::string_view name) {
  for (const auto& [s, n] : kStateNames) {
    if (n == name) return s;
  }
  throw ImportError(fmt::format("unknown annotation state '{}'", name));
}

std::set<AnnotationState> ParseStateList(std::string_view csv) {
  std::set<AnnotationState> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto end = std::min(csv.find(',', start), csv.size());
    auto token = csv.substr(start, end - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) out.insert(ParseAnnotationState(token));
    start = end + 1;
  }
  return out;
}

bool IsTerminal(AnnotationState state) {
  return state == AnnotationState::kSeed || state == AnnotationState::kApproved ||
         state == AnnotationState::kBackgroundConfirmed ||
         state == AnnotationState::kRejected;
}

std::set<AnnotationState> AllStates() {
  std::set<AnnotationState> out;
  for (const auto& [s, _] : kStateNames) out.insert(s);
  return out;
}

// --- ClassCatalog -----------------------------------------------------------

ClassCatalog::ClassCatalog(std::vector<std::string> names) {
  for (auto& n : names) Add(n);
}

bool ClassCatalog::Add(const std::string& name) {
  if (IsBackground(name)) {
    throw PreconditionError("Background is reserved and cannot be a catalog class");
  }
  if (name.empty()) throw PreconditionError("class name must be non-empty");
  if (Contains(name)) return false;
  names_.push_back(name);
  return true;
}

bool ClassCatalog::Contains(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

bool ClassCatalog::Accepts(std::string_view name) const {
  return IsBackground(name) || Contains(name);
}

int ClassCatalog::IndexOf(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

// --- Events -----------------------------------------------------------------

json EventToJson(const Event& event) {
  json j{{"seq", event.seq}};
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, ClassAdded>) {
          j["type"] = "class_added";
          j["name"] = e.name;
        } else if constexpr (std::is_same_v<T, ImageAdded>) {
          j["type"] = "image_added";
          j["image"] = ImageToJson(e.image);
        } else if constexpr (std::is_same_v<T, AnnotationCreated>) {
          j["type"] = "annotation_created";
          j["annotation"] = AnnotationToJson(e.annotation);
        } else if constexpr (std::is_same_v<T, AnnotationPublished>) {
          j["type"] = "published";
          j["ann_id"] = e.ann_id;
        } else if constexpr (std::is_same_v<T, ReviewApplied>) {
          j["type"] = "review_applied";
          j["ann_id"] = e.ann_id;
          j["decision"] = json{{"kind", std::string(DecisionKindName(e.decision.kind))},
                               {"class", e.decision.class_label},
                               {"box", BoxToJson(e.decision.box)}};
          j["review"] = ReviewToJson(e.review);
        } else if constexpr (std::is_same_v<T, HitAudited>) {
          j["type"] = "hit_audited";
          j["hit_id"] = e.hit_id;
          j["worker_id"] = e.worker_id;
          j["gold_iou"] = e.gold_iou;
          j["approved"] = e.approved;
          j["reason"] = e.reason;
          j["timestamp"] = e.timestamp;
        } else if constexpr (std::is_same_v<T, RunRecord>) {
          j["type"] = "run_record";
          j["kind"] = e.kind;
          j["data"] = e.data;
        }
      },
      event.body);
  return j;
}

Event EventFromJson(const json& j) {
  try {
    Event ev;
    ev.seq = j.at("seq").get<std::uint64_t>();
    const auto type = j.at("type").get<std::string>();
    if (type == "class_added") {
      ev.body = ClassAdded{j.at("name").get<std::string>()};
    } else if (type == "image_added") {
      ev.body = ImageAdded{ImageFromJson(j.at("image"))};
    } else if (type == "annotation_created") {
      ev.body = AnnotationCreated{AnnotationFromJson(j.at("annotation"))};
    } else if (type == "published") {
      ev.body = AnnotationPublished{j.at("ann_id").get<std::string>()};
    } else if (type == "review_applied") {
      const auto& d = j.at("decision");
      ReviewDecision decision{ParseDecisionKind(d.at("kind").get<std::string>()),
                              d.at("class").get<std::string>(), BoxFromJson(d.at("box"))};
      ev.body = ReviewApplied{j.at("ann_id").get<std::string>(), std::move(decision),
                              ReviewFromJson(j.at("review"))};
    } else if (type == "hit_audited") {
      ev.body = HitAudited{j.at("hit_id").get<std::string>(),
                           j.at("worker_id").get<std::string>(),
                           j.at("gold_iou").get<double>(), j.at("approved").get<bool>(),
                           j.at("reason").get<std::string>(),
                           j.at("timestamp").get<std::int64_t>()};
    } else if (type == "run_record") {
      ev.body = RunRecord{j.at("kind").get<std::string>(), j.at("data")};
    } else {
      throw ImportError(fmt::format("unknown event type '{}'", type));
    }
    return ev;
  } catch (const json::exception& e) {
    throw ImportError(fmt::format("malformed event: {}", e.what()));
  }
}

// --- Dataset ----------------------------------------------------------------

void Dataset::Apply(const Event& event) {
  if (event.seq <= last_seq_) {
    throw StateError(
        fmt::format("event seq {} not after last seq {}", event.seq, last_seq_));
  }
  std::visit([this](const auto& e) { ApplyBody(e); }, event.body);
  last_seq_ = event.seq;
}

void Dataset::ApplyBody(const ClassAdded& e) {
  if (catalog_.Contains(e.name)) {
    throw StateError(fmt::format("class '{}' already exists", e.name));
  }
  catalog_.Add(e.name);
}

void Dataset::ApplyBody(const ImageAdded& e) {
  const auto& im = e.image;
  if (im.image_id.empty()) throw StateError("image id must be non-empty");
  if (!(im.width > 0.0) || !(im.height > 0.0)) {
    throw StateError(fmt::format("image '{}' has non-positive size", im.image_id));
  }
  if (images_.count(im.image_id)) {
    throw StateError(fmt::format("duplicate image id '{}'", im.image_id));
  }
  images_.emplace(im.image_id, im);
}

void Dataset::ApplyBody(const AnnotationCreated& e) {
  const auto& a = e.annotation;
  if (a.ann_id.empty()) throw StateError("annotation id must be non-empty");
  if (annotations_.count(a.ann_id)) {
    throw StateError(fmt::format("duplicate annotation id '{}'", a.ann_id));
  }
  const auto* image = FindImage(a.image_id);
  if (image == nullptr) {
    throw StateError(fmt::format("annotation '{}' references unknown image '{}'",
                                 a.ann_id, a.image_id));
  }
  if (!CreatableState(a.state)) {
    throw StateError(fmt::format("annotation '{}' cannot be created in state {}",
                                 a.ann_id, ToString(a.state)));
  }
  if (!catalog_.Contains(a.class_label)) {
    throw StateError(fmt::format("annotation '{}' has class '{}' not in catalog",
                                 a.ann_id, a.class_label));
  }
  if (!a.box.IsValid() ||
      !Contains(BBox{0, 0, image->width, image->height}, a.box)) {
    throw StateError(fmt::format("annotation '{}' box {} invalid for image '{}'",
                                 a.ann_id, reeflabel::ToString(a.box), a.image_id));
  }
  if (!a.history.empty() || a.publish_count != 0) {
    throw StateError("new annotations carry no review history");
  }
  annotations_.emplace(a.ann_id, a);
}

void Dataset::ApplyBody(const AnnotationPublished& e) {
  auto it = annotations_.find(e.ann_id);
  if (it == annotations_.end()) {
    throw StateError(fmt::format("unknown annotation '{}'", e.ann_id));
  }
  auto& a = it->second;
  if (a.state == AnnotationState::kPredicted) {
    a.publish_count = 1;
  } else if (a.state != AnnotationState::kRepublished) {
    throw StateError(fmt::format("cannot publish '{}' from state {}", e.ann_id,
                                 ToString(a.state)));
  }
  a.state = AnnotationState::kPendingReview;
}

void Dataset::ApplyBody(const ReviewApplied& e) {
  auto it = annotations_.find(e.ann_id);
  if (it == annotations_.end()) {
    throw StateError(fmt::format("unknown annotation '{}'", e.ann_id));
  }
  Annotation next = it->second;
  if (next.state != AnnotationState::kPendingReview) {
    throw StateError(fmt::format("annotation '{}' is {} and not under review",
                                 e.ann_id, ToString(next.state)));
  }
  if (!next.history.empty() && e.review.timestamp < next.history.back().timestamp) {
    throw StateError(fmt::format("review of '{}' is older than its history", e.ann_id));
  }
  const auto& d = e.decision;
  switch (d.kind) {
    case ReviewDecision::Kind::kFinalize:
      if (!catalog_.Accepts(d.class_label)) {
        throw StateError(fmt::format("unknown class '{}'", d.class_label));
      }
      if (IsBackground(d.class_label)) {
        next.class_label = std::string(kBackground);
        next.state = AnnotationState::kBackgroundConfirmed;
      } else {
        if (!d.box.IsValid()) throw StateError("finalized box is invalid");
        next.class_label = d.class_label;
        next.box = d.box;
        next.state = AnnotationState::kApproved;
      }
      break;
    case ReviewDecision::Kind::kRepublish:
      if (!catalog_.Accepts(d.class_label)) {
        throw StateError(fmt::format("unknown class '{}'", d.class_label));
      }
      next.class_label = d.class_label;
      // A background vote carries no meaningful box; keep the current one.
      if (!IsBackground(d.class_label)) {
        if (!d.box.IsValid()) throw StateError("republished box is invalid");
        next.box = d.box;
      }
      next.state = AnnotationState::kRepublished;
      next.publish_count += 1;
      break;
    case ReviewDecision::Kind::kReject:
      next.state = AnnotationState::kRejected;
      break;
  }
  next.history.push_back(e.review);
  it->second = std::move(next);
}

const ImageRecord* Dataset::FindImage(std::string_view id) const {
  auto it = images_.find(std::string(id));
  return it == images_.end() ? nullptr : &it->second;
}

const Annotation* Dataset::FindAnnotation(std::string_view id) const {
  auto it = annotations_.find(std::string(id));
  return it == annotations_.end() ? nullptr : &it->second;
}

const Annotation& Dataset::GetAnnotation(std::string_view id) const {
  const auto* a = FindAnnotation(id);
  if (a == nullptr) throw NotFoundError(fmt::format("unknown annotation '{}'", id));
  return *a;
}

std::vector<const Annotation*> Dataset::AnnotationsOnImage(std::string_view image_id) const {
  std::vector<const Annotation*> out;
  for (const auto& [_, a] : annotations_) {
    if (a.image_id == image_id) out.push_back(&a);
  }
  return out;
}

std::vector<const Annotation*> Dataset::AnnotationsInStates(
    const std::set<AnnotationState>& states) const {
  std::vector<const Annotation*> out;
  for (const auto& [_, a] : annotations_) {
    if (states.count(a.state)) out.push_back(&a);
  }
  return out;
}

std::string Dataset::NextAnnotationId(std::string_view prefix) const {
  for (std::size_t n = annotations_.size();; ++n) {
    auto id = fmt::format("{}{:06d}", prefix, n);
    if (!annotations_.count(id)) return id;
  }
}

Dataset Replay(const std::vector<Event>& events) {
  Dataset d;
  for (const auto& e : events) d.Apply(e);
  return d;
}

// --- Transaction / LabelStore ------------------------------------------------

Transaction::Transaction(Dataset base)
    : working_(std::move(base)), base_seq_(working_.last_seq()) {}

void Transaction::Apply(EventBody body) {
  Event ev{base_seq_ + staged_.size() + 1, std::move(body)};
  working_.Apply(ev);
  staged_.push_back(std::move(ev));
}

std::unique_ptr<LabelStore> LabelStore::Open(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto store = std::make_unique<LabelStore>();
  store->dir_ = dir;
  const auto snapshot_path = dir / "snapshot.jsonl";
  const auto log_path = dir / "events.jsonl";
  if (std::filesystem::exists(snapshot_path)) {
    store->dataset_ = ReadSnapshotFile(snapshot_path);
  }
  if (std::filesystem::exists(log_path)) {
    store->events_ = ReadEventLog(log_path);
    for (const auto& e : store->events_) {
      if (e.seq > store->dataset_.last_seq()) store->dataset_.Apply(e);
    }
  }
  return store;
}

Dataset LabelStore::Snapshot() const {
  std::shared_lock lock(mu_);
  return dataset_;
}

Transaction LabelStore::Begin() const { return Transaction(Snapshot()); }

void LabelStore::Commit(Transaction&& tx) {
  std::lock_guard writer(writer_mu_);
  {
    std::shared_lock lock(mu_);
    if (tx.base_seq_ != dataset_.last_seq()) {
      throw StateError(fmt::format("stale transaction: based on seq {}, store at {}",
                                   tx.base_seq_, dataset_.last_seq()));
    }
  }
  if (tx.staged_.empty()) return;
  if (dir_) AppendEventLog(*dir_ / "events.jsonl", tx.staged_);
  std::unique_lock lock(mu_);
  dataset_ = std::move(tx.working_);
  events_.insert(events_.end(), std::make_move_iterator(tx.staged_.begin()),
                 std::make_move_iterator(tx.staged_.end()));
  tx.staged_.clear();
}

void LabelStore::ApplyOne(EventBody body) {
  std::lock_guard writer(writer_mu_);
  Event ev;
  Dataset next;
  {
    std::shared_lock lock(mu_);
    ev = Event{dataset_.last_seq() + 1, std::move(body)};
    next = dataset_;
  }
  next.Apply(ev);
  if (dir_) AppendEventLog(*dir_ / "events.jsonl", {ev});
  std::unique_lock lock(mu_);
  dataset_ = std::move(next);
  events_.push_back(std::move(ev));
}

std::vector<Event> LabelStore::Events() const {
  std::shared_lock lock(mu_);
  return events_;
}

void LabelStore::WriteSnapshot() {
  if (!dir_) return;
  WriteSnapshotFile(Snapshot(), *dir_ / "snapshot.jsonl");
}

std::vector<Event> ReadEventLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ImportError(fmt::format("cannot open event log {}", path.string()));
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t last = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ImportError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
    auto ev = EventFromJson(j);
    if (ev.seq <= last) {
      throw ImportError(fmt::format("{}:{}: sequence number {} not increasing",
                                    path.string(), line_no, ev.seq));
    }
    last = ev.seq;
    events.push_back(std::move(ev));
  }
  return events;
}

void AppendEventLog(const std::filesystem::path& path, const std::vector<Event>& events) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw StateError(fmt::format("cannot append to {}", path.string()));
  for (const auto& e : events) out << EventToJson(e).dump() << '\n';
  out.flush();
  if (!out) throw StateError(fmt::format("write to {} failed", path.string()));
}

void WriteSnapshotFile(const Dataset& dataset, const std::filesystem::path& path) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << json{{"type", "snapshot"}, {"seq", dataset.last_seq()}}.dump() << '\n';
    for (const auto& name : dataset.catalog().names()) {
      out << json{{"type", "class"}, {"name", name}}.dump() << '\n';
    }
    for (const auto& [_, im] : dataset.images()) {
      out << json{{"type", "image"}, {"image", ImageToJson(im)}}.dump() << '\n';
    }
    for (const auto& [_, a] : dataset.annotations()) {
      out << json{{"type", "annotation"}, {"annotation", AnnotationToJson(a)}}.dump()
          << '\n';
    }
    if (!out) throw StateError(fmt::format("write to {} failed", tmp));
  }
  std::filesystem::rename(tmp, path);
}

Dataset ReadSnapshotFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ImportError(fmt::format("cannot open snapshot {}", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw ImportError("empty snapshot");
  const auto header = json::parse(line);
  if (header.value("type", "") != "snapshot") throw ImportError("missing snapshot header");
  const auto seq = header.at("seq").get<std::uint64_t>();

  // Rebuild through the event path so every invariant is rechecked, then
  // restore states and histories verbatim.
  std::vector<EventBody> bodies;
  std::vector<Annotation> annotations;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "class") {
      bodies.emplace_back(ClassAdded{j.at("name").get<std::string>()});
    } else if (type == "image") {
      bodies.emplace_back(ImageAdded{ImageFromJson(j.at("image"))});
    } else if (type == "annotation") {
      annotations.push_back(AnnotationFromJson(j.at("annotation")));
    } else {
      throw ImportError(fmt::format("unknown snapshot record type '{}'", type));
    }
  }
  Dataset out;
  std::uint64_t s = 0;
  for (auto& b : bodies) out.Apply(Event{++s, std::move(b)});
  for (auto& a : annotations) {
    if (out.annotations_.count(a.ann_id)) {
      throw ImportError(fmt::format("duplicate annotation '{}' in snapshot", a.ann_id));
    }
    if (!out.FindImage(a.image_id) || !out.catalog_.Accepts(a.class_label) ||
        !a.box.IsValid()) {
      throw ImportError(fmt::format("snapshot annotation '{}' is inconsistent", a.ann_id));
    }
    const bool background = IsBackground(a.class_label);
    if (background && (a.state == AnnotationState::kSeed ||
                       a.state == AnnotationState::kApproved)) {
      throw ImportError(fmt::format("snapshot annotation '{}' is {} with Background class",
                                    a.ann_id, ToString(a.state)));
    }
    out.annotations_.emplace(a.ann_id, std::move(a));
  }
  out.last_seq_ = seq;
  return out;
}

}  // namespace reeflabel
