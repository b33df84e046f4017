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

#include "reeflabel/crowdgate.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "reeflabel/errors.h"

namespace reeflabel {

namespace {

BBox JitterBox(const BBox& box, double sigma, const ImageExtent& extent, Rng& rng) {
  if (sigma <= 0.0) return box;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double w = box.Width();
    const double h = box.Height();
    BBox j{box.x_min + sigma * w * n(rng), box.y_min + sigma * h * n(rng),
           box.x_max + sigma * w * n(rng), box.y_max + sigma * h * n(rng)};
    if (auto clipped = ClipBox(j, extent)) return *clipped;
  }
  return box;
}

SubTask GoldSubtask(const GoldItem& gold, const CrowdConfig& cfg, Rng& rng) {
  SubTask s;
  s.ann_id = gold.ann_id;
  s.image_id = gold.image_id;
  s.proposed_box = JitterBox(gold.box, cfg.gold_proposal_jitter, gold.extent, rng);
  s.crop_viewport = CropViewport(s.proposed_box, cfg.viewport_scale, gold.extent);
  s.proposed_class = gold.class_label;
  s.is_gold = true;
  return s;
}

}  // namespace

std::string_view ToString(HitStatus status) {
  switch (status) {
    case HitStatus::kOpen: return "open";
    case HitStatus::kLeased: return "leased";
    case HitStatus::kSubmitted: return "submitted";
    case HitStatus::kApproved: return "approved";
    case HitStatus::kRejected: return "rejected";
  }
  return "open";
}

std::string_view ToString(SubmitResult::Status status) {
  switch (status) {
    case SubmitResult::Status::kApproved: return "approved";
    case SubmitResult::Status::kRejected: return "rejected";
    case SubmitResult::Status::kStale: return "stale";
  }
  return "rejected";
}

BBox CropViewport(const BBox& box, double scale, const ImageExtent& extent) {
  const double side = std::max(box.Width(), box.Height()) * std::max(scale, 1.0);
  const BBox raw{box.CenterX() - 0.5 * side, box.CenterY() - 0.5 * side,
                 box.CenterX() + 0.5 * side, box.CenterY() + 0.5 * side};
  auto clipped = ClipBox(raw, extent);
  return clipped ? *clipped : box;
}

std::vector<Hit> AssembleHits(const std::vector<HitCandidate>& pending,
                              const std::vector<GoldItem>& gold_pool,
                              const CrowdConfig& cfg, std::uint64_t seed,
                              std::size_t first_hit_number, const std::string& hit_prefix) {
  if (gold_pool.empty()) {
    throw ConfigError("gold pool is empty; auto-approval is impossible");
  }
  if (cfg.hit_size < 2) throw ConfigError("hit_size must be >= 2");
  std::vector<Hit> hits;
  if (pending.empty()) return hits;

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, gold_pool.size() - 1);
  const std::size_t real_per_hit = static_cast<std::size_t>(cfg.hit_size) - 1;

  for (std::size_t start = 0; start < pending.size(); start += real_per_hit) {
    const std::size_t end = std::min(pending.size(), start + real_per_hit);
    Hit hit;
    hit.hit_id = fmt::format("{}{:07d}", hit_prefix, first_hit_number + hits.size());
    std::set<std::string> used_gold;
    auto draw_gold = [&]() -> const GoldItem& {
      // Prefer distinct gold within a HIT when the pool allows it.
      for (int attempt = 0; attempt < 16; ++attempt) {
        const auto& g = gold_pool[pick(rng)];
        if (used_gold.insert(g.ann_id).second) return g;
      }
      return gold_pool[pick(rng)];
    };
    for (std::size_t i = start; i < end; ++i) {
      const auto& c = pending[i];
      SubTask s;
      s.ann_id = c.ann_id;
      s.image_id = c.image_id;
      s.proposed_box = c.box;
      s.crop_viewport = CropViewport(c.box, cfg.viewport_scale, c.extent);
      s.proposed_class = c.class_label;
      s.is_gold = false;
      hit.subtasks.push_back(std::move(s));
    }
    while (hit.subtasks.size() < real_per_hit) {
      hit.subtasks.push_back(GoldSubtask(draw_gold(), cfg, rng));
    }
    // Padding gold is interleaved with the real work; the gating gold stays last.
    std::shuffle(hit.subtasks.begin(), hit.subtasks.end(), rng);
    hit.subtasks.push_back(GoldSubtask(draw_gold(), cfg, rng));
    hit.gold_position = hit.subtasks.size() - 1;
    hits.push_back(std::move(hit));
  }
  return hits;
}

ApprovalResult AutoApprove(const Hit& hit, const WorkerAnswer& answer,
                           const BBox& gold_truth, const std::string& gold_class,
                           const CrowdConfig& cfg) {
  if (answer.answers.size() != hit.subtasks.size()) {
    throw PreconditionError(fmt::format("expected {} answers, got {}", hit.subtasks.size(),
                                        answer.answers.size()));
  }
  if (!(cfg.approval_threshold > 0.0 && cfg.approval_threshold < 1.0)) {
    throw ConfigError("approval threshold must lie in (0, 1)");
  }
  const auto& gold_answer = answer.answers[hit.gold_position];
  ApprovalResult r;
  r.gold_iou = gold_answer.adjusted_box.IsValid() ? Iou(gold_answer.adjusted_box, gold_truth)
                                                  : 0.0;
  r.approved = r.gold_iou > cfg.approval_threshold;
  if (cfg.require_gold_class && gold_answer.selected_class != gold_class) r.approved = false;
  return r;
}

// --- Consensus --------------------------------------------------------------

ConsensusOutcome ConsensusStep(const ConsensusState& state,
                               const std::string& answer_class, const BBox& answer_box) {
  ConsensusOutcome out;
  out.class_label = answer_class;
  out.box = answer_box;
  if (answer_class == state.current_class) {
    out.finalized = true;
    out.next = ConsensusState{answer_class, false, state.publish_count};
  } else {
    out.finalized = false;
    out.next = ConsensusState{answer_class, true, state.publish_count + 1};
  }
  return out;
}

ConsensusState ConsensusStateOf(const Annotation& annotation) {
  return ConsensusState{annotation.class_label, true, std::max(1, annotation.publish_count)};
}

std::vector<ConsensusTrace> EnumerateConsensus(const std::vector<std::string>& labels,
                                               const std::string& predicted,
                                               std::size_t max_length) {
  if (max_length > 6) throw PreconditionError("max_length must be <= 6");
  std::vector<ConsensusTrace> out;
  if (labels.empty()) return out;
  const std::size_t base = labels.size();
  for (std::size_t len = 1; len <= max_length; ++len) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < len; ++i) total *= base;
    for (std::size_t code = 0; code < total; ++code) {
      ConsensusTrace trace;
      ConsensusState state{predicted, true, 1};
      std::size_t rest = code;
      std::vector<std::size_t> digits(len);
      for (std::size_t i = len; i-- > 0;) {
        digits[i] = rest % base;
        rest /= base;
      }
      for (std::size_t i = 0; i < len; ++i) {
        trace.answers.push_back(labels[digits[i]]);
        if (trace.finalized_at != 0) continue;
        auto step = ConsensusStep(state, labels[digits[i]], BBox{0, 0, 1, 1});
        state = step.next;
        if (step.finalized) {
          trace.finalized_at = i + 1;
          trace.final_class = step.class_label;
        }
      }
      trace.publish_count = state.publish_count;
      if (trace.finalized_at == 0) trace.final_class = state.current_class;
      out.push_back(std::move(trace));
    }
  }
  return out;
}

// --- HitPool ----------------------------------------------------------------

HitPool::HitPool(CrowdConfig cfg, std::vector<GoldItem> gold_pool, std::uint64_t seed,
                 std::string hit_prefix)
    : cfg_(cfg), gold_pool_(std::move(gold_pool)), seed_(seed),
      hit_prefix_(std::move(hit_prefix)) {
  if (gold_pool_.empty()) {
    throw ConfigError("gold pool is empty; auto-approval is impossible");
  }
  for (const auto& g : gold_pool_) gold_by_id_.emplace(g.ann_id, g);
}

void HitPool::Enqueue(HitCandidate candidate, std::set<std::string> prior_reviewers) {
  std::lock_guard lock(mu_);
  auto& reviewers = reviewers_[candidate.ann_id];
  reviewers.insert(prior_reviewers.begin(), prior_reviewers.end());
  tracked_.insert(candidate.ann_id);
  buffer_.push_back(std::move(candidate));
}

std::vector<std::string> HitPool::Flush() {
  std::lock_guard lock(mu_);
  return FlushLocked();
}

std::vector<std::string> HitPool::FlushLocked() {
  std::vector<std::string> ids;
  if (buffer_.empty()) return ids;
  auto hits = AssembleHits(buffer_, gold_pool_, cfg_, DeriveSeed(seed_, ++flushes_),
                           hit_counter_, hit_prefix_);
  std::size_t cursor = 0;
  const std::size_t per_hit = static_cast<std::size_t>(cfg_.hit_size) - 1;
  for (auto& h : hits) {
    const std::size_t end = std::min(buffer_.size(), cursor + per_hit);
    hit_candidates_[h.hit_id] =
        std::vector<HitCandidate>(buffer_.begin() + cursor, buffer_.begin() + end);
    cursor = end;
    ids.push_back(h.hit_id);
    active_.insert(h.hit_id);
    hits_.emplace(h.hit_id, std::move(h));
  }
  hit_counter_ += hits.size();
  buffer_.clear();
  return ids;
}

bool HitPool::Eligible(const Hit& hit, const std::string& worker_id) const {
  if (!cfg_.distinct_reviewers) return true;
  for (const auto& s : hit.subtasks) {
    if (s.is_gold) continue;
    auto it = reviewers_.find(s.ann_id);
    if (it != reviewers_.end() && it->second.count(worker_id)) return false;
  }
  return true;
}

std::optional<Hit> HitPool::Lease(const std::string& worker_id, TimestampMs now) {
  if (worker_id.empty()) throw PreconditionError("worker_id must be non-empty");
  std::lock_guard lock(mu_);
  auto wit = workers_.find(worker_id);
  if (wit != workers_.end() && wit->second.consecutive_rejections >= cfg_.soft_block_after) {
    return std::nullopt;
  }
  for (const auto& id : active_) {
    auto& hit = hits_.at(id);
    const bool free = hit.status == HitStatus::kOpen ||
                      (hit.status == HitStatus::kLeased && hit.lease &&
                       hit.lease->expiry < now);
    if (!free || !Eligible(hit, worker_id)) continue;
    hit.status = HitStatus::kLeased;
    hit.lease = HitLease{worker_id, now + cfg_.lease_duration_ms};
    return hit;
  }
  return std::nullopt;
}

SubmitResult HitPool::Submit(const std::string& hit_id, const std::string& worker_id,
                             const WorkerAnswer& answer, TimestampMs now) {
  std::lock_guard lock(mu_);
  SubmitResult result;
  auto it = hits_.find(hit_id);
  if (it == hits_.end()) {
    result.status = SubmitResult::Status::kStale;
    result.reason = "unknown hit";
    return result;
  }
  Hit& hit = it->second;
  if (hit.status != HitStatus::kLeased || !hit.lease || hit.lease->worker_id != worker_id) {
    result.status = SubmitResult::Status::kStale;
    result.reason = "hit not leased to this worker";
    return result;
  }
  if (now > hit.lease->expiry) {
    result.status = SubmitResult::Status::kStale;
    result.reason = "lease expired";
    return result;
  }
  if (answer.answers.size() != hit.subtasks.size()) {
    throw PreconditionError(fmt::format("expected {} answers, got {}", hit.subtasks.size(),
                                        answer.answers.size()));
  }
  const auto& gold = gold_by_id_.at(hit.gold().ann_id);
  const auto approval = AutoApprove(hit, answer, gold.box, gold.class_label, cfg_);
  result.gold_iou = approval.gold_iou;
  auto& record = workers_[worker_id];
  hit.lease.reset();
  active_.erase(hit_id);
  const auto& candidates = hit_candidates_.at(hit_id);
  if (approval.approved) {
    hit.status = HitStatus::kApproved;
    result.status = SubmitResult::Status::kApproved;
    result.reason = "gold passed";
    ++record.approvals;
    record.consecutive_rejections = 0;
    for (std::size_t i = 0; i < hit.subtasks.size(); ++i) {
      const auto& s = hit.subtasks[i];
      if (s.is_gold) continue;
      result.reviews.emplace_back(s, answer.answers[i]);
      reviewers_[s.ann_id].insert(worker_id);
      tracked_.erase(s.ann_id);
    }
  } else {
    hit.status = HitStatus::kRejected;
    result.status = SubmitResult::Status::kRejected;
    result.reason = "gold failed";
    ++record.rejections;
    ++record.consecutive_rejections;
    buffer_.insert(buffer_.end(), candidates.begin(), candidates.end());
  }
  return result;
}

void HitPool::RecordReviewer(const std::string& ann_id, const std::string& worker_id) {
  std::lock_guard lock(mu_);
  reviewers_[ann_id].insert(worker_id);
}

std::optional<Hit> HitPool::Find(const std::string& hit_id) const {
  std::lock_guard lock(mu_);
  auto it = hits_.find(hit_id);
  if (it == hits_.end()) return std::nullopt;
  return it->second;
}

bool HitPool::Tracks(const std::string& ann_id) const {
  std::lock_guard lock(mu_);
  return tracked_.count(ann_id) > 0;
}

std::size_t HitPool::buffered() const {
  std::lock_guard lock(mu_);
  return buffer_.size();
}

std::size_t HitPool::open_or_leased() const {
  std::lock_guard lock(mu_);
  return active_.size();
}

bool HitPool::Idle() const {
  std::lock_guard lock(mu_);
  return buffer_.empty() && active_.empty();
}

bool HitPool::IsBlocked(const std::string& worker_id) const {
  std::lock_guard lock(mu_);
  auto it = workers_.find(worker_id);
  return it != workers_.end() && it->second.consecutive_rejections >= cfg_.soft_block_after;
}

WorkerRecord HitPool::worker(const std::string& worker_id) const {
  std::lock_guard lock(mu_);
  auto it = workers_.find(worker_id);
  return it == workers_.end() ? WorkerRecord{} : it->second;
}

// --- CrowdSession -----------------------------------------------------------

std::vector<GoldItem> CrowdSession::GoldPoolFrom(const Dataset& dataset,
                                                 const CrowdConfig& cfg) {
  std::vector<GoldItem> gold;
  for (const auto& [id, a] : dataset.annotations()) {
    const bool usable = a.state == AnnotationState::kSeed ||
                        (cfg.gold_from_approved && a.state == AnnotationState::kApproved);
    if (!usable) continue;
    const auto* image = dataset.FindImage(a.image_id);
    gold.push_back(GoldItem{id, a.image_id, a.box, a.class_label, image->Extent()});
  }
  return gold;
}

CrowdSession::CrowdSession(CrowdConfig cfg, const Dataset& dataset, std::uint64_t seed,
                           std::string hit_prefix)
    : cfg_(cfg), pool_(cfg, GoldPoolFrom(dataset, cfg), seed, std::move(hit_prefix)) {}

void CrowdSession::Enqueue(const Dataset& dataset, const Annotation& a) {
  std::set<std::string> prior;
  for (const auto& r : a.history) prior.insert(r.worker_id);
  const auto* image = dataset.FindImage(a.image_id);
  pool_.Enqueue(HitCandidate{a.ann_id, a.image_id, a.box, a.class_label, image->Extent()},
                std::move(prior));
}

std::size_t CrowdSession::PublishPending(Transaction& tx) {
  std::vector<std::string> ids;
  for (const auto& [id, a] : tx.dataset().annotations()) {
    if (a.state == AnnotationState::kPredicted || a.state == AnnotationState::kRepublished) {
      ids.push_back(id);
    } else if (a.state == AnnotationState::kPendingReview && !pool_.Tracks(id)) {
      ids.push_back(id);
    }
  }
  for (const auto& id : ids) {
    if (tx.dataset().GetAnnotation(id).state != AnnotationState::kPendingReview) {
      tx.Apply(AnnotationPublished{id});
    }
    Enqueue(tx.dataset(), tx.dataset().GetAnnotation(id));
  }
  return ids.size();
}

std::optional<Hit> CrowdSession::Lease(const std::string& worker_id, TimestampMs now) {
  auto hit = pool_.Lease(worker_id, now);
  if (!hit && pool_.buffered() > 0) {
    pool_.Flush();
    hit = pool_.Lease(worker_id, now);
  }
  return hit;
}

SubmitResult CrowdSession::Submit(Transaction& tx, const std::string& hit_id,
                                  const std::string& worker_id, const WorkerAnswer& answer,
                                  TimestampMs now) {
  std::lock_guard lock(submit_mu_);
  auto result = pool_.Submit(hit_id, worker_id, answer, now);
  tx.Apply(HitAudited{hit_id, worker_id, result.gold_iou,
                      result.status == SubmitResult::Status::kApproved,
                      result.status == SubmitResult::Status::kStale
                          ? "stale: " + result.reason
                          : result.reason,
                      now});
  if (result.status != SubmitResult::Status::kApproved) return result;

  for (const auto& [subtask, ans] : result.reviews) {
    const auto& a = tx.dataset().GetAnnotation(subtask.ann_id);
    if (a.state != AnnotationState::kPendingReview) continue;
    const auto* image = tx.dataset().FindImage(a.image_id);
    BBox box = a.box;
    if (auto clipped = ClipBox(ans.adjusted_box, image->Extent())) box = *clipped;
    std::string cls = ans.selected_class;
    if (!tx.dataset().catalog().Accepts(cls)) cls = a.class_label;

    const auto outcome = ConsensusStep(ConsensusStateOf(a), cls, box);
    ReviewDecision decision = outcome.ToDecision();
    if (!outcome.finalized && a.publish_count >= cfg_.max_publish_count) {
      decision = ReviewDecision::Reject();
    }
    ApplyReviewOutcome(tx, a.ann_id, decision,
                       ReviewEvent{worker_id, box, cls, true, now});
    if (decision.kind == ReviewDecision::Kind::kRepublish) {
      tx.Apply(AnnotationPublished{a.ann_id});
      Enqueue(tx.dataset(), tx.dataset().GetAnnotation(a.ann_id));
    }
  }
  return result;
}

}  // namespace reeflabel
