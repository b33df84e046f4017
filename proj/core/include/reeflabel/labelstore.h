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
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "reeflabel/geometry.h"

namespace reeflabel {

inline constexpr std::string_view kBackground = "Background";

inline bool IsBackground(std::string_view label) { return label == kBackground; }

enum class Split { kSeed, kPool, kValidation };

enum class AnnotationState {
  kSeed,
  kPredicted,
  kPendingReview,
  kApproved,
  kBackgroundConfirmed,
  kRepublished,
  kRejected,
};

std::string_view ToString(Split split);
std::string_view ToString(AnnotationState state);
// Both throw ImportError on unknown names; corrupt labels must not load.
Split ParseSplit(std::string_view name);
AnnotationState ParseAnnotationState(std::string_view name);
// Accepts comma-separated lists such as "approved,seed".
std::set<AnnotationState> ParseStateList(std::string_view csv);

bool IsTerminal(AnnotationState state);

struct ImageRecord {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::string uri;
  Split split = Split::kPool;

  ImageExtent Extent() const { return {width, height}; }
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

// Ordered object classes. `Background` is implicit and never listed.
class ClassCatalog {
 public:
  ClassCatalog() = default;
  explicit ClassCatalog(std::vector<std::string> names);

  // Returns false if already present. Throws PreconditionError for Background.
  bool Add(const std::string& name);
  bool Contains(std::string_view name) const;
  // True for catalog classes and Background.
  bool Accepts(std::string_view name) const;
  int IndexOf(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  friend bool operator==(const ClassCatalog&, const ClassCatalog&) = default;

 private:
  std::vector<std::string> names_;
};

struct ReviewEvent {
  std::string worker_id;
  BBox submitted_box;
  std::string selected_class;
  std::optional<bool> gold_passed;  // nullopt: not applicable
  std::int64_t timestamp = 0;

  friend bool operator==(const ReviewEvent&, const ReviewEvent&) = default;
};

struct Annotation {
  std::string ann_id;
  std::string image_id;
  std::string class_label;
  BBox box;
  AnnotationState state = AnnotationState::kSeed;
  std::optional<double> score;
  int publish_count = 0;
  std::vector<ReviewEvent> history;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// The outcome of a consensus step applied to an annotation under review.
struct ReviewDecision {
  enum class Kind { kFinalize, kRepublish, kReject };
  Kind kind = Kind::kFinalize;
  std::string class_label;
  BBox box;

  static ReviewDecision Finalize(std::string cls, BBox box) {
    return {Kind::kFinalize, std::move(cls), box};
  }
  static ReviewDecision Republish(std::string cls, BBox box) {
    return {Kind::kRepublish, std::move(cls), box};
  }
  static ReviewDecision Reject() { return {Kind::kReject, {}, {}}; }

  friend bool operator==(const ReviewDecision&, const ReviewDecision&) = default;
};

// ---------------------------------------------------------------------------
// Events. Every mutation of a Dataset is one of these; replaying the ordered
// event list from an empty Dataset reproduces the state exactly.

struct ClassAdded {
  std::string name;
};
struct ImageAdded {
  ImageRecord image;
};
// Only Seed and Predicted annotations may be created.
struct AnnotationCreated {
  Annotation annotation;
};
// Predicted/Republished -> PendingReview.
struct AnnotationPublished {
  std::string ann_id;
};
struct ReviewApplied {
  std::string ann_id;
  ReviewDecision decision;
  ReviewEvent review;
};
// Audit trail for HIT gating. Does not change labels.
struct HitAudited {
  std::string hit_id;
  std::string worker_id;
  double gold_iou = 0.0;
  bool approved = false;
  std::string reason;
  std::int64_t timestamp = 0;
};
// Opaque run-level record (detections, training summaries, loop markers).
// Stored in the log and ignored by Dataset::Apply.
struct RunRecord {
  std::string kind;
  nlohmann::json data;
};

using EventBody = std::variant<ClassAdded, ImageAdded, AnnotationCreated,
                               AnnotationPublished, ReviewApplied, HitAudited,
                               RunRecord>;

struct Event {
  std::uint64_t seq = 0;
  EventBody body;
};

nlohmann::json EventToJson(const Event& event);
Event EventFromJson(const nlohmann::json& j);

// ---------------------------------------------------------------------------

class Dataset {
 public:
  // Validates and applies; throws (leaving *this unchanged) on illegal events.
  void Apply(const Event& event);

  const ClassCatalog& catalog() const { return catalog_; }
  const std::map<std::string, ImageRecord>& images() const { return images_; }
  const std::map<std::string, Annotation>& annotations() const { return annotations_; }
  const ImageRecord* FindImage(std::string_view id) const;
  const Annotation* FindAnnotation(std::string_view id) const;
  const Annotation& GetAnnotation(std::string_view id) const;
  std::uint64_t last_seq() const { return last_seq_; }

  std::vector<const Annotation*> AnnotationsOnImage(std::string_view image_id) const;
  std::vector<const Annotation*> AnnotationsInStates(
      const std::set<AnnotationState>& states) const;

  // Lowest unused id of the form `<prefix><n>`.
  std::string NextAnnotationId(std::string_view prefix) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  friend Dataset ReadSnapshotFile(const std::filesystem::path& path);

  void ApplyBody(const ClassAdded& e);
  void ApplyBody(const ImageAdded& e);
  void ApplyBody(const AnnotationCreated& e);
  void ApplyBody(const AnnotationPublished& e);
  void ApplyBody(const ReviewApplied& e);
  void ApplyBody(const HitAudited&) {}
  void ApplyBody(const RunRecord&) {}

  ClassCatalog catalog_;
  std::map<std::string, ImageRecord> images_;
  std::map<std::string, Annotation> annotations_;
  std::uint64_t last_seq_ = 0;
};

Dataset Replay(const std::vector<Event>& events);

// A staged batch of events over a private copy of the store. Nothing is
// visible to readers until LabelStore::Commit.
class Transaction {
 public:
  explicit Transaction(Dataset base);

  // Applies to the working copy and stages the event. Throws on illegal events.
  void Apply(EventBody body);

  const Dataset& dataset() const { return working_; }
  std::uint64_t base_seq() const { return base_seq_; }
  const std::vector<Event>& staged() const { return staged_; }

 private:
  friend class LabelStore;
  Dataset working_;
  std::uint64_t base_seq_;
  std::vector<Event> staged_;
};

// Single-writer, multi-reader store backed by an append-only JSON-lines event
// log and an optional snapshot file.
class LabelStore {
 public:
  // In-memory store with no persistence.
  LabelStore() = default;

  // Opens (creating if needed) a store directory holding `events.jsonl` and,
  // optionally, `snapshot.jsonl`.
  static std::unique_ptr<LabelStore> Open(const std::filesystem::path& dir);

  Dataset Snapshot() const;
  Transaction Begin() const;

  // Publishes the transaction atomically. Throws StateError if another commit
  // landed since Begin().
  void Commit(Transaction&& tx);

  // Convenience: begin, apply one event, commit.
  void ApplyOne(EventBody body);

  // Every event ever committed, in order (including pre-snapshot events if
  // the log still holds them).
  std::vector<Event> Events() const;

  void WriteSnapshot();

  const std::optional<std::filesystem::path>& dir() const { return dir_; }

 private:
  mutable std::shared_mutex mu_;
  std::mutex writer_mu_;
  Dataset dataset_;
  std::vector<Event> events_;
  std::optional<std::filesystem::path> dir_;
};

std::vector<Event> ReadEventLog(const std::filesystem::path& path);
void AppendEventLog(const std::filesystem::path& path, const std::vector<Event>& events);

void WriteSnapshotFile(const Dataset& dataset, const std::filesystem::path& path);
// Returns the dataset encoded in a snapshot file. Unknown states are fatal.
Dataset ReadSnapshotFile(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Operations.

struct ImportSummary {
  std::size_t images = 0;
  std::size_t annotations = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Ingests a box-JSON document (images/categories/annotations with
// bbox = [x, y, w, h]). Annotations enter as Seed. Documents flagged
// `"hidden": true` are refused.
ImportSummary ImportBoxes(Transaction& tx, const nlohmann::json& document);

// Ingests a dot-CSV document (`image_id,x,y,class_label`). Each in-bounds dot
// becomes a Predicted seed box awaiting tightening; out-of-bounds dots are
// skipped with a warning.
ImportSummary ImportDots(Transaction& tx, std::string_view csv,
                         double half_extent = kDefaultSeedHalfExtent);

void ApplyReviewOutcome(Transaction& tx, const std::string& ann_id,
                        const ReviewDecision& decision, const ReviewEvent& review);

struct ExportOptions {
  std::set<AnnotationState> states;
  bool include_background = false;
};

nlohmann::json ExportBoxes(const Dataset& dataset, const ExportOptions& options);
// Byte-stable serialization used for files.
std::string SerializeBoxes(const nlohmann::json& document);

// Per-class counts over annotations in `states`. Always has one key per
// catalog class plus Background.
std::map<std::string, int> ClassCounts(const Dataset& dataset,
                                       const std::set<AnnotationState>& states);

std::set<AnnotationState> AllStates();

}  // namespace reeflabel
