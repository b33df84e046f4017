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

#include "reeflabel/orchestrator.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "reeflabel/errors.h"
#include "reeflabel/rng.h"

namespace reeflabel {

using nlohmann::json;

namespace {

json OptionalJson(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string OptionalCsv(const std::optional<double>& v) {
  return v ? fmt::format("{:.6f}", *v) : std::string();
}

int CountStates(const Dataset& ds, std::initializer_list<AnnotationState> states) {
  return static_cast<int>(ds.AnnotationsInStates(std::set<AnnotationState>(states)).size());
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

// --- LoopReport -----------------------------------------------------------------

json LoopReport::ToJson() const {
  json cls = json::object();
  for (const auto& [name, row] : classes) {
    cls[name] = {{"labels", row.labels},
                 {"delta", row.delta},
                 {"seed", row.seed},
                 {"hidden_total", row.hidden_total},
                 {"published", row.published},
                 {"published_true", row.published_true},
                 {"precision", OptionalJson(row.precision)},
                 {"ap50", OptionalJson(row.ap50)}};
  }
  return {{"loop", loop},
          {"mode", mode},
          {"config_hash", config_hash},
          {"class_order", class_order},
          {"classes", cls},
          {"background", {{"count", background}, {"delta", background_delta}}},
          {"map50", OptionalJson(map50)},
          {"new_labels", new_labels},
          {"new_label_delta_ratio", new_label_delta_ratio},
          {"pool_coverage", pool_coverage},
          {"hidden_coverage", hidden_coverage},
          {"undotted_recovery", OptionalJson(undotted_recovery)},
          {"detections", {{"total", detections}, {"published", published}}},
          {"training",
           {{"background_labels", background_labels_in_training},
            {"final_loss", OptionalJson(final_training_loss)}}},
          {"crowd",
           {{"hits_approved", crowd.hits_approved},
            {"hits_rejected", crowd.hits_rejected},
            {"stale_submissions", crowd.stale_submissions},
            {"reviews", crowd.reviews},
            {"finalized", crowd.finalized},
            {"republished", crowd.republished},
            {"rejected_annotations", crowd.rejected_annotations},
            {"max_publish_count", crowd.max_publish_count},
            {"still_pending", crowd.still_pending}}}};
}

std::string LoopReport::ToCsv() const {
  std::string out = "loop,class,labels,delta,seed,hidden_total,precision,ap50\n";
  for (const auto& name : class_order) {
    const auto& row = classes.at(name);
    out += fmt::format("{},{},{},{},{},{},{},{}\n", loop, name, row.labels, row.delta,
                       row.seed, row.hidden_total, OptionalCsv(row.precision),
                       OptionalCsv(row.ap50));
  }
  out += fmt::format("{},{},{},{},,,,\n", loop, kBackground, background, background_delta);
  out += fmt::format("{},mAP50,,,,,,{}\n", loop, OptionalCsv(map50));
  return out;
}

// --- ReportBuilder --------------------------------------------------------------

ReportBuilder::ReportBuilder(const HiddenWorld& world, std::set<std::string> undotted)
    : world_(world), undotted_(std::move(undotted)) {}

void ReportBuilder::ConsumeAll(const std::vector<Event>& events) {
  for (const auto& e : events) Consume(e);
}

void ReportBuilder::Consume(const Event& event) {
  dataset_.Apply(event);
  std::visit(
      Overloaded{
          [&](const RunRecord& r) {
            if (r.kind == "run_started") {
              config_hash_ = r.data.at("config_hash").get<std::string>();
              mode_ = r.data.at("mode").get<std::string>();
              publish_threshold_ = r.data.at("publish_threshold").get<double>();
            } else if (r.kind == "loop_started") {
              loop_ = r.data.at("loop").get<int>();
              approved_at_start_ = CountStates(dataset_, {AnnotationState::kApproved});
              detections_.reset();
              training_ = nullptr;
              crowd_ = CrowdStats{};
            } else if (r.kind == "detections") {
              detections_ = DetectionsFromJson(r.data.at("detections"));
            } else if (r.kind == "training") {
              if (r.data.at("loop").get<int>() == loop_) training_ = r.data;
            } else if (r.kind == "loop_completed") {
              reports_.push_back(Build(r.data.at("loop").get<int>()));
            }
          },
          [&](const HitAudited& h) {
            if (h.reason.rfind("stale", 0) == 0) {
              ++crowd_.stale_submissions;
            } else if (h.approved) {
              ++crowd_.hits_approved;
            } else {
              ++crowd_.hits_rejected;
            }
          },
          [&](const ReviewApplied& r) {
            ++crowd_.reviews;
            switch (r.decision.kind) {
              case ReviewDecision::Kind::kFinalize: ++crowd_.finalized; break;
              case ReviewDecision::Kind::kRepublish: ++crowd_.republished; break;
              case ReviewDecision::Kind::kReject: ++crowd_.rejected_annotations; break;
            }
          },
          [](const auto&) {}},
      event.body);
}

LoopReport ReportBuilder::Build(int loop) const {
  LoopReport r;
  r.loop = loop;
  r.mode = mode_;
  r.config_hash = config_hash_;
  const LoopReport* prev = reports_.empty() ? nullptr : &reports_.back();

  const auto seeds = ClassCounts(dataset_, {AnnotationState::kSeed});
  const auto approved = ClassCounts(dataset_, {AnnotationState::kApproved});
  const auto totals = world_.ClassTotals();
  std::vector<std::string> classes = dataset_.catalog().names();
  r.class_order = classes;

  std::optional<Evaluation> eval;
  if (detections_) {
    std::vector<std::string> images;
    for (const auto& [id, _] : *detections_) images.push_back(id);
    eval = Evaluate(*detections_, TruthsFromWorld(world_, images), classes, 0.5,
                    publish_threshold_);
    r.map50 = eval->map;
    for (const auto& [_, list] : *detections_) {
      r.detections += static_cast<int>(list.size());
      r.published += static_cast<int>(std::count_if(
          list.begin(), list.end(),
          [&](const Detection& d) { return d.score >= publish_threshold_; }));
    }
  }

  int total_labels = 0;
  for (const auto& cls : classes) {
    ClassRow row;
    row.labels = approved.at(cls);
    row.seed = seeds.at(cls);
    auto tit = totals.find(cls);
    row.hidden_total = tit == totals.end() ? 0 : tit->second;
    row.delta = row.labels - (prev && prev->classes.count(cls) ? prev->classes.at(cls).labels : 0);
    if (eval) {
      const auto& ce = eval->classes.at(cls);
      row.precision = ce.precision;
      row.ap50 = ce.ap;
      row.published = ce.published;
      row.published_true = ce.published_true;
    }
    total_labels += row.labels + row.seed;
    r.classes[cls] = row;
  }
  r.background = CountStates(dataset_, {AnnotationState::kBackgroundConfirmed});
  r.background_delta = r.background - (prev ? prev->background : 0);
  r.new_labels = CountStates(dataset_, {AnnotationState::kApproved}) - approved_at_start_;
  r.new_label_delta_ratio =
      total_labels > 0 ? static_cast<double>(r.new_labels) / total_labels : 0.0;

  // Coverage of the hidden world by the current labels.
  int pool_total = 0, pool_hit = 0, all_total = 0, all_hit = 0, undotted_hit = 0;
  for (const auto& [image_id, image] : world_.images()) {
    const auto anns = dataset_.AnnotationsOnImage(image_id);
    for (const auto& obj : world_.ObjectsOn(image_id)) {
      bool by_approved = false, by_any = false;
      for (const auto* a : anns) {
        const bool labeled =
            a->state == AnnotationState::kApproved || a->state == AnnotationState::kSeed;
        if (!labeled || a->class_label != obj.class_label || Iou(a->box, obj.box) < 0.5) {
          continue;
        }
        by_any = true;
        if (a->state == AnnotationState::kApproved) by_approved = true;
      }
      ++all_total;
      all_hit += by_any;
      if (image.split == Split::kPool) {
        ++pool_total;
        pool_hit += by_approved;
      }
      if (undotted_.count(obj.object_id)) undotted_hit += by_approved;
    }
  }
  r.pool_coverage = pool_total > 0 ? static_cast<double>(pool_hit) / pool_total : 0.0;
  r.hidden_coverage = all_total > 0 ? static_cast<double>(all_hit) / all_total : 0.0;
  if (!undotted_.empty()) {
    r.undotted_recovery = static_cast<double>(undotted_hit) / undotted_.size();
  }

  r.crowd = crowd_;
  for (const auto& [_, a] : dataset_.annotations()) {
    r.crowd.max_publish_count = std::max(r.crowd.max_publish_count, a.publish_count);
    if (a.state == AnnotationState::kPendingReview || a.state == AnnotationState::kRepublished) {
      ++r.crowd.still_pending;
    }
  }
  if (training_.is_object()) {
    r.background_labels_in_training = training_.at("background_labels").get<int>();
    const auto& trace = training_.at("trace");
    if (!trace.empty()) r.final_training_loss = trace.back().at("loss").get<double>();
  }
  return r;
}

std::vector<LoopReport> ReplayReports(const std::vector<Event>& events, const HiddenWorld& world,
                                      const std::set<std::string>& undotted) {
  ReportBuilder builder(world, undotted);
  builder.ConsumeAll(events);
  return builder.reports();
}

// --- Orchestrator ---------------------------------------------------------------

Orchestrator::Orchestrator(RunConfig cfg, const Scenario& scenario, LabelStore& store)
    : cfg_(std::move(cfg)),
      scenario_(scenario),
      store_(store),
      config_hash_(ConfigHash(cfg_)),
      workers_(MakePopulation(cfg_.workers, DeriveSeed(cfg_.seed, "workers"))),
      model_(std::make_unique<LinearLogisticModel>(SimFeatureSource::kDim)),
      features_(scenario.world, DeriveSeed(cfg_.seed, "features"), cfg_.feature_noise),
      detector_(scenario.world, cfg_.detector),
      builder_(scenario.world, scenario.undotted) {
  Validate(cfg_);
}

void Orchestrator::Feed() {
  for (const auto& e : store_.Events()) {
    if (e.seq <= fed_seq_) continue;
    builder_.Consume(e);
    fed_seq_ = e.seq;
  }
}

void Orchestrator::Initialize() {
  if (initialized_) return;
  auto tx = store_.Begin();
  tx.Apply(RunRecord{"run_started",
                     {{"config_hash", config_hash_},
                      {"mode", std::string(ToString(cfg_.mode))},
                      {"seed", cfg_.seed},
                      {"publish_threshold", cfg_.publish_threshold}}});
  ImportBoxes(tx, scenario_.world.PublicImagesDocument());
  ImportBoxes(tx, scenario_.seed_boxes);
  if (cfg_.mode == RunMode::kLegacyDots) {
    const auto summary = ImportDots(tx, scenario_.dots_csv, cfg_.seed_half_extent);
    spdlog::info("imported {} dots ({} skipped)", summary.annotations, summary.skipped);
  }
  std::unique_ptr<LinearLogisticModel> trained;
  if (cfg_.mode == RunMode::kFromSeed) trained = Train(tx, 0);
  store_.Commit(std::move(tx));
  if (trained) model_ = std::move(trained);
  Feed();
  initialized_ = true;
}

std::unique_ptr<LinearLogisticModel> Orchestrator::Train(Transaction& tx, int loop) const {
  auto model = std::make_unique<LinearLogisticModel>(*model_);
  const auto images = TrainingImagesFromDataset(tx.dataset(), cfg_.background_training);
  TrainConfig tc = cfg_.trainer;
  tc.background_labels = cfg_.background_training;
  const auto result = TrainEpochs(*model, images, features_, tc, cfg_.train_epochs,
                                  DeriveSeed(DeriveSeed(cfg_.seed, "train"),
                                             static_cast<std::uint64_t>(loop)));
  int objects = 0, backgrounds = 0;
  for (const auto& im : images) {
    objects += static_cast<int>(im.objects.size());
    backgrounds += static_cast<int>(im.backgrounds.size());
  }
  json trace = json::array();
  for (const auto& e : result.trace) {
    trace.push_back({{"epoch", e.epoch},
                     {"loss", e.loss},
                     {"cls_i", e.cls_i},
                     {"cls_j", e.cls_j},
                     {"cls_k", e.cls_k},
                     {"reg", e.reg}});
  }
  std::vector<double> params(model->params().begin(), model->params().end());
  tx.Apply(RunRecord{"training",
                     {{"loop", loop},
                      {"epochs", cfg_.train_epochs},
                      {"images", images.size()},
                      {"objects", objects},
                      {"background_labels", backgrounds},
                      {"trace", trace},
                      {"params", params}}});
  return model;
}

void Orchestrator::CrowdPhase(Transaction& tx, int loop) {
  CrowdSession session(cfg_.crowd, tx.dataset(),
                       DeriveSeed(DeriveSeed(cfg_.seed, "crowd"), static_cast<std::uint64_t>(loop)),
                       fmt::format("L{}-hit-", loop));
  session.PublishPending(tx);
  const auto classes = tx.dataset().catalog().names();
  const auto answer_seed = DeriveSeed(cfg_.seed, "answers");
  for (int round = 0; round < cfg_.max_rounds; ++round) {
    bool any = false;
    for (const auto& w : workers_) {
      ++clock_;
      auto hit = session.Lease(w.worker_id, clock_);
      if (!hit) continue;
      any = true;
      const auto answer = AnswerHit(w, *hit, scenario_.world, classes,
                                    DeriveSeed(answer_seed, w.worker_id));
      ++clock_;
      session.Submit(tx, hit->hit_id, w.worker_id, answer, clock_);
    }
    if (!any) break;
  }
  if (!session.pool().Idle()) {
    spdlog::warn("loop {}: crowd phase ended with work outstanding", loop);
  }
}

LoopReport Orchestrator::RunLoop() {
  Initialize();
  const int n = loop_ + 1;
  auto tx = store_.Begin();
  tx.Apply(RunRecord{"loop_started", {{"loop", n}}});

  const bool detect = !(cfg_.mode == RunMode::kLegacyDots && n == 1);
  if (detect) {
    const auto state = DetectorStateFrom(tx.dataset(), scenario_.world, cfg_.background_training);
    std::vector<std::string> pool;
    for (const auto& [id, im] : tx.dataset().images()) {
      if (im.split == Split::kPool) pool.push_back(id);
    }
    const auto dets = detector_.DetectAll(
        pool, state, DeriveSeed(DeriveSeed(cfg_.seed, "detect"), static_cast<std::uint64_t>(n)));
    tx.Apply(RunRecord{"detections",
                       {{"loop", n},
                        {"state", state.ToJson()},
                        {"publish_threshold", cfg_.publish_threshold},
                        {"detections", DetectionsToJson(dets)}}});
    int counter = 0;
    for (const auto& [image_id, list] : dets) {
      const auto novel = FilterNew(list, tx.dataset().AnnotationsOnImage(image_id),
                                   cfg_.dedup_iou);
      for (const auto& d : novel) {
        if (d.score < cfg_.publish_threshold) continue;
        Annotation a;
        a.ann_id = fmt::format("L{}-{:06d}", n, counter++);
        a.image_id = image_id;
        a.class_label = d.class_label;
        a.box = d.box;
        a.state = AnnotationState::kPredicted;
        a.score = d.score;
        tx.Apply(AnnotationCreated{std::move(a)});
      }
    }
  }

  CrowdPhase(tx, n);
  auto trained = Train(tx, n);
  tx.Apply(RunRecord{"loop_completed", {{"loop", n}}});
  store_.Commit(std::move(tx));
  model_ = std::move(trained);
  loop_ = n;
  Feed();
  return builder_.reports().back();
}

bool Orchestrator::converged() const {
  std::vector<double> ratios;
  for (const auto& r : builder_.reports()) ratios.push_back(r.new_label_delta_ratio);
  return !ratios.empty() && HasConverged(ratios, cfg_.epsilon, cfg_.patience);
}

std::vector<LoopReport> Orchestrator::Run() {
  Initialize();
  while (loop_ < cfg_.max_loops) {
    const auto report = RunLoop();
    spdlog::info("loop {}: {} new labels, pool coverage {:.3f}, delta ratio {:.4f}",
                 report.loop, report.new_labels, report.pool_coverage,
                 report.new_label_delta_ratio);
    if (cfg_.stop_on_convergence && converged()) break;
  }
  return builder_.reports();
}

// --- Runs -----------------------------------------------------------------------

namespace {

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StateError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::map<std::string, std::string> ReportFiles(const std::vector<LoopReport>& reports) {
  std::map<std::string, std::string> files;
  for (const auto& r : reports) {
    files[fmt::format("reports/loop_{}.json", r.loop)] = r.ToJson().dump(2) + "\n";
    files[fmt::format("reports/loop_{}.csv", r.loop)] = r.ToCsv();
  }
  files["reports/summary.csv"] = SummaryCsv(reports);
  return files;
}

RunVerification VerifyRun(const std::filesystem::path& run_dir) {
  const auto events = ReadEventLog(run_dir / "store" / "events.jsonl");
  const auto scenario = ReadScenario(run_dir / "data");
  RunVerification v;
  v.reports = ReplayReports(events, scenario.world, scenario.undotted);
  for (const auto& [name, text] : ReportFiles(v.reports)) {
    const auto path = run_dir / name;
    if (!std::filesystem::exists(path) || ReadFile(path) != text) v.mismatches.push_back(name);
  }
  return v;
}

std::vector<LoopReport> RunInMemory(const RunConfig& cfg, const Scenario& scenario) {
  LabelStore store;
  Orchestrator orchestrator(cfg, scenario, store);
  return orchestrator.Run();
}

RunOutcome RunSimulation(const RunConfig& cfg, const std::filesystem::path& output_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(output_dir / "reports");
  auto store = LabelStore::Open(output_dir / "store");
  if (!store->Events().empty()) {
    throw StateError(fmt::format("store '{}' is not empty; choose a fresh output directory",
                                 (output_dir / "store").string()));
  }
  const Scenario scenario = PrepareScenario(cfg);
  WriteScenario(scenario, output_dir / "data");

  Orchestrator orchestrator(cfg, scenario, *store);
  RunOutcome outcome;
  outcome.reports = orchestrator.Run();
  outcome.converged = orchestrator.converged();
  outcome.output_dir = output_dir;
  store->WriteSnapshot();

  for (const auto& [name, text] : ReportFiles(outcome.reports)) WriteFile(output_dir / name, text);
  for (const auto& e : store->Events()) {
    const auto* rec = std::get_if<RunRecord>(&e.body);
    if (!rec || rec->kind != "training") continue;
    std::vector<EpochLoss> trace;
    for (const auto& t : rec->data.at("trace")) {
      trace.push_back({t.at("epoch").get<int>(), t.at("loss").get<double>(),
                       t.at("cls_i").get<double>(), t.at("cls_j").get<double>(),
                       t.at("cls_k").get<double>(), t.at("reg").get<double>()});
    }
    WriteFile(output_dir / "reports" /
                  fmt::format("loss_loop_{}.csv", rec->data.at("loop").get<int>()),
              LossTraceCsv(trace));
  }

  json manifest = {
      {"config_hash", ConfigHash(cfg)},
      {"seed", cfg.seed},
      {"mode", std::string(ToString(cfg.mode))},
      {"loops", outcome.reports.size()},
      {"converged", outcome.converged},
      {"derived_seeds",
       {{"world", DeriveSeed(cfg.seed, "world")},
        {"dots", DeriveSeed(cfg.seed, "dots")},
        {"workers", DeriveSeed(cfg.seed, "workers")},
        {"features", DeriveSeed(cfg.seed, "features")},
        {"detect", DeriveSeed(cfg.seed, "detect")},
        {"crowd", DeriveSeed(cfg.seed, "crowd")},
        {"answers", DeriveSeed(cfg.seed, "answers")},
        {"train", DeriveSeed(cfg.seed, "train")}}},
      {"config", RunConfigToJson(cfg)}};
  WriteFile(output_dir / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

std::string SummaryTable(const std::vector<LoopReport>& reports) {
  if (reports.empty()) return "no loops\n";
  const auto& classes = reports.front().class_order;
  std::string out = fmt::format("{:<6}", "loop");
  for (const auto& c : classes) out += fmt::format(" {:>16}", c);
  out += fmt::format(" {:>16} {:>8} {:>9}\n", kBackground, "mAP/50", "coverage");
  for (const auto& r : reports) {
    out += fmt::format("{:<6}", r.loop);
    for (const auto& c : classes) {
      const auto& row = r.classes.at(c);
      out += fmt::format(" {:>16}", fmt::format("{}({:+d})", row.labels, row.delta));
    }
    out += fmt::format(" {:>16}", fmt::format("{}({:+d})", r.background, r.background_delta));
    out += fmt::format(" {:>8}", r.map50 ? fmt::format("{:.4f}", *r.map50) : "-");
    out += fmt::format(" {:>9.4f}\n", r.pool_coverage);
  }
  return out;
}

std::string SummaryCsv(const std::vector<LoopReport>& reports) {
  std::string out;
  if (reports.empty()) return out;
  const auto& classes = reports.front().class_order;
  out = "loop";
  for (const auto& c : classes) out += fmt::format(",{0},{0}_delta", c);
  out += ",Background,Background_delta,map50,new_label_delta_ratio,pool_coverage\n";
  for (const auto& r : reports) {
    out += fmt::format("{}", r.loop);
    for (const auto& c : classes) {
      out += fmt::format(",{},{}", r.classes.at(c).labels, r.classes.at(c).delta);
    }
    out += fmt::format(",{},{},{},{:.6f},{:.6f}\n", r.background, r.background_delta,
                       OptionalCsv(r.map50), r.new_label_delta_ratio, r.pool_coverage);
  }
  return out;
}

// --- Ablation -------------------------------------------------------------------

namespace {

std::map<std::string, double> PooledPrecision(const std::vector<LoopReport>& reports) {
  std::map<std::string, std::pair<int, int>> sums;
  for (const auto& r : reports) {
    if (r.loop < 2) continue;
    for (const auto& [cls, row] : r.classes) {
      sums[cls].first += row.published_true;
      sums[cls].second += row.published;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [cls, s] : sums) {
    out[cls] = s.second > 0 ? static_cast<double>(s.first) / s.second : 0.0;
  }
  return out;
}

}  // namespace

json AblationResult::ToJson() const {
  json seeds_json = json::array();
  for (const auto& s : seeds) {
    json on_curve = json::array(), off_curve = json::array();
    for (const auto& r : s.reports_on) on_curve.push_back(r.ToJson());
    for (const auto& r : s.reports_off) off_curve.push_back(r.ToJson());
    seeds_json.push_back({{"seed", s.seed},
                          {"precision_on", s.precision_on},
                          {"precision_off", s.precision_off},
                          {"on_at_least_off", s.on_at_least_off},
                          {"reports_on", on_curve},
                          {"reports_off", off_curve}});
  }
  return {{"seeds", seeds_json}, {"seeds_on_at_least_off", seeds_on_at_least_off}};
}

AblationResult PrecisionAblation(const RunConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  AblationResult result;
  for (auto seed : seeds) {
    RunConfig on = cfg;
    on.seed = seed;
    on.stop_on_convergence = false;
    on.background_training = true;
    RunConfig off = on;
    off.background_training = false;
    const Scenario scenario = PrepareScenario(on);

    AblationSeedResult s;
    s.seed = seed;
    s.reports_on = RunInMemory(on, scenario);
    s.reports_off = RunInMemory(off, scenario);
    s.precision_on = PooledPrecision(s.reports_on);
    s.precision_off = PooledPrecision(s.reports_off);
    s.on_at_least_off = std::all_of(s.precision_on.begin(), s.precision_on.end(),
                                    [&](const auto& kv) {
                                      return kv.second >= s.precision_off.at(kv.first);
                                    });
    result.seeds_on_at_least_off += s.on_at_least_off;
    result.seeds.push_back(std::move(s));
  }
  return result;
}

}  // namespace reeflabel
