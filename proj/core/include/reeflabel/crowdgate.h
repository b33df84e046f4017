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
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "reeflabel/geometry.h"
#include "reeflabel/labelstore.h"
#include "reeflabel/rng.h"

namespace reeflabel {

using TimestampMs = std::int64_t;

struct CrowdConfig {
  int hit_size = 10;
  // Gold IoU must be strictly greater than this for a HIT to be approved.
  double approval_threshold = 0.8;
  bool require_gold_class = false;
  TimestampMs lease_duration_ms = 10 * 60 * 1000;
  // Consecutive rejections after which a worker receives no more leases.
  int soft_block_after = 3;
  // Viewport side as a multiple of the proposed box side.
  double viewport_scale = 3.0;
  // Relative jitter applied to a gold box before it is shown as a proposal.
  double gold_proposal_jitter = 0.05;
  // A republished annotation that still has no agreement after this many
  // publications is Rejected as unresolvable.
  int max_publish_count = 8;
  bool distinct_reviewers = true;
  // Draw gold from Approved annotations as well as Seed.
  bool gold_from_approved = false;
};

struct SubTask {
  std::string ann_id;
  std::string image_id;
  BBox crop_viewport;
  BBox proposed_box;
  std::string proposed_class;
  bool is_gold = false;
};

enum class HitStatus { kOpen, kLeased, kSubmitted, kApproved, kRejected };
std::string_view ToString(HitStatus status);

struct HitLease {
  std::string worker_id;
  TimestampMs expiry = 0;
};

struct Hit {
  std::string hit_id;
  std::vector<SubTask> subtasks;
  std::size_t gold_position = 0;
  std::optional<HitLease> lease;
  HitStatus status = HitStatus::kOpen;

  const SubTask& gold() const { return subtasks.at(gold_position); }
};

struct SubtaskAnswer {
  BBox adjusted_box;
  std::string selected_class;

  friend bool operator==(const SubtaskAnswer&, const SubtaskAnswer&) = default;
};

struct WorkerAnswer {
  std::vector<SubtaskAnswer> answers;
};

// An annotation waiting to be shown to workers.
struct HitCandidate {
  std::string ann_id;
  std::string image_id;
  BBox box;
  std::string class_label;
  ImageExtent extent;
};

// A known-good annotation used as hidden gold.
struct GoldItem {
  std::string ann_id;
  std::string image_id;
  BBox box;
  std::string class_label;
  ImageExtent extent;
};

// Square-ish viewport around `box`, `scale` times its size, clipped to the image.
BBox CropViewport(const BBox& box, double scale, const ImageExtent& extent);

// Groups candidates into HITs of cfg.hit_size: hit_size-1 real subtasks plus
// one gold subtask drawn uniformly from `gold_pool`, gold last. A short final
// group is padded with additional gold. Throws ConfigError on empty gold.
std::vector<Hit> AssembleHits(const std::vector<HitCandidate>& pending,
                              const std::vector<GoldItem>& gold_pool,
                              const CrowdConfig& cfg, std::uint64_t seed,
                              std::size_t first_hit_number = 0,
                              const std::string& hit_prefix = "hit-");

struct ApprovalResult {
  bool approved = false;
  double gold_iou = 0.0;
};

// Gold gate: approved iff iou(answer gold box, truth) > threshold.
ApprovalResult AutoApprove(const Hit& hit, const WorkerAnswer& answer,
                           const BBox& gold_truth, const std::string& gold_class,
                           const CrowdConfig& cfg);

// ---------------------------------------------------------------------------
// Consensus: the model prediction is vote zero; an object's class is fixed
// when two consecutive votes agree.

struct ConsensusState {
  std::string current_class;
  bool agreement_needed = true;
  int publish_count = 1;

  friend bool operator==(const ConsensusState&, const ConsensusState&) = default;
};

struct ConsensusOutcome {
  bool finalized = false;
  // Finalize: the agreed class/box. Republish: the new current class/box.
  std::string class_label;
  BBox box;
  ConsensusState next;

  ReviewDecision ToDecision() const {
    return finalized ? ReviewDecision::Finalize(class_label, box)
                     : ReviewDecision::Republish(class_label, box);
  }
};

ConsensusOutcome ConsensusStep(const ConsensusState& state,
                               const std::string& answer_class, const BBox& answer_box);

ConsensusState ConsensusStateOf(const Annotation& annotation);

struct ConsensusTrace {
  std::vector<std::string> answers;
  // Index (1-based) of the answer that finalized, 0 if still open.
  std::size_t finalized_at = 0;
  std::string final_class;
  int publish_count = 1;
};

// Runs every answer sequence of length 1..max_length over `labels` through
// ConsensusStep starting from `predicted`. Answers after finalization are
// ignored. max_length must be <= 6.
std::vector<ConsensusTrace> EnumerateConsensus(const std::vector<std::string>& labels,
                                               const std::string& predicted,
                                               std::size_t max_length);

// ---------------------------------------------------------------------------

struct SubmitResult {
  enum class Status { kApproved, kRejected, kStale };
  Status status = Status::kRejected;
  double gold_iou = 0.0;
  std::string reason;
  // For approved HITs: the real subtasks and their answers, in HIT order.
  std::vector<std::pair<SubTask, SubtaskAnswer>> reviews;
};

std::string_view ToString(SubmitResult::Status status);

struct WorkerRecord {
  int approvals = 0;
  int rejections = 0;
  int consecutive_rejections = 0;
};

// Thread-safe pool of HITs with atomic lease/submit transitions.
class HitPool {
 public:
  HitPool(CrowdConfig cfg, std::vector<GoldItem> gold_pool, std::uint64_t seed,
          std::string hit_prefix = "hit-");

  // Adds to the unassigned buffer. `prior_reviewers` may not receive it.
  void Enqueue(HitCandidate candidate, std::set<std::string> prior_reviewers = {});
  // Assembles the whole buffer into Open HITs; returns new hit ids.
  std::vector<std::string> Flush();

  // Leases one Open HIT (or one whose lease expired) that the worker is
  // eligible for. Empty when none, or the worker is soft-blocked.
  std::optional<Hit> Lease(const std::string& worker_id, TimestampMs now);

  // Gates the answer on the hidden gold. Stale or foreign submissions change
  // nothing but are reported for audit.
  SubmitResult Submit(const std::string& hit_id, const std::string& worker_id,
                      const WorkerAnswer& answer, TimestampMs now);

  // Records a completed review so the worker is not shown that annotation again.
  void RecordReviewer(const std::string& ann_id, const std::string& worker_id);

  std::optional<Hit> Find(const std::string& hit_id) const;
  // True while the annotation sits in the buffer or in an uncompleted HIT.
  bool Tracks(const std::string& ann_id) const;
  std::size_t buffered() const;
  std::size_t open_or_leased() const;
  bool Idle() const;
  bool IsBlocked(const std::string& worker_id) const;
  WorkerRecord worker(const std::string& worker_id) const;
  const std::vector<GoldItem>& gold_pool() const { return gold_pool_; }
  const CrowdConfig& config() const { return cfg_; }

 private:
  std::vector<std::string> FlushLocked();
  bool Eligible(const Hit& hit, const std::string& worker_id) const;

  mutable std::mutex mu_;
  CrowdConfig cfg_;
  std::vector<GoldItem> gold_pool_;
  std::map<std::string, GoldItem> gold_by_id_;
  std::uint64_t seed_;
  std::string hit_prefix_;
  std::uint64_t flushes_ = 0;
  std::size_t hit_counter_ = 0;
  std::vector<HitCandidate> buffer_;
  std::map<std::string, Hit> hits_;
  std::map<std::string, std::vector<HitCandidate>> hit_candidates_;
  std::set<std::string> active_;  // ids of Open/Leased HITs, leased in id order
  std::set<std::string> tracked_;
  std::map<std::string, std::set<std::string>> reviewers_;
  std::map<std::string, WorkerRecord> workers_;
};

// Binds a HitPool to label-store transactions. Both the HTTP service and the
// in-process simulator go through this class, so they emit identical events.
class CrowdSession {
 public:
  CrowdSession(CrowdConfig cfg, const Dataset& dataset, std::uint64_t seed,
               std::string hit_prefix = "hit-");

  static std::vector<GoldItem> GoldPoolFrom(const Dataset& dataset, const CrowdConfig& cfg);

  // Publishes every Predicted/Republished annotation (and re-queues any
  // PendingReview annotation the pool does not know about).
  std::size_t PublishPending(Transaction& tx);

  // Leases a HIT, assembling buffered work first if nothing is open.
  std::optional<Hit> Lease(const std::string& worker_id, TimestampMs now);

  // Gates the answer, writes the audit record, runs consensus for each real
  // subtask of an approved HIT and applies the outcomes to `tx`.
  SubmitResult Submit(Transaction& tx, const std::string& hit_id,
                      const std::string& worker_id, const WorkerAnswer& answer,
                      TimestampMs now);

  HitPool& pool() { return pool_; }
  const HitPool& pool() const { return pool_; }

 private:
  void Enqueue(const Dataset& dataset, const Annotation& annotation);

  CrowdConfig cfg_;
  HitPool pool_;
  std::mutex submit_mu_;
};

}  // namespace reeflabel
