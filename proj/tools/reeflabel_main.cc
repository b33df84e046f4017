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

// reeflabel: dataset management, simulated labeling runs, the annotation
// task service and report replay.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "reeflabel/config.h"
#include "reeflabel/errors.h"
#include "reeflabel/labelstore.h"
#include "reeflabel/orchestrator.h"
#include "reeflabel/rng.h"
#include "reeflabel/scenario.h"
#include "reeflabel/service.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void HandleSignal(int) { g_stop = true; }

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw reeflabel::NotFoundError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw reeflabel::StateError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

void PrintError(std::string_view kind, std::string_view message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

int ExitCodeFor(std::string_view kind) {
  if (kind == "config" || kind == "usage") return 2;
  if (kind == "not_found") return 3;
  if (kind == "state") return 4;
  if (kind == "import" || kind == "rejected_record" || kind == "precondition") return 5;
  return 1;
}

std::unique_ptr<reeflabel::LabelStore> OpenExistingStore(const fs::path& dir) {
  if (!fs::exists(dir / "events.jsonl")) {
    throw reeflabel::NotFoundError(
        fmt::format("'{}' is not a store (run `reeflabel init` first)", dir.string()));
  }
  return reeflabel::LabelStore::Open(dir);
}

void PrintImportSummary(const reeflabel::ImportSummary& s) {
  for (const auto& w : s.warnings) spdlog::warn("{}", w);
  std::cout << json{{"images", s.images},
                    {"annotations", s.annotations},
                    {"skipped", s.skipped},
                    {"warnings", s.warnings.size()}}
                   .dump()
            << "\n";
}

// --- commands -------------------------------------------------------------

int CmdInit(const fs::path& store_dir) {
  if (fs::exists(store_dir / "events.jsonl") && fs::file_size(store_dir / "events.jsonl") > 0) {
    throw reeflabel::StateError(fmt::format("store '{}' already exists", store_dir.string()));
  }
  reeflabel::LabelStore::Open(store_dir);
  std::cout << json{{"store", store_dir.string()}}.dump() << "\n";
  return 0;
}

int CmdImportBoxes(const fs::path& store_dir, const fs::path& file) {
  auto store = OpenExistingStore(store_dir);
  json doc;
  try {
    doc = json::parse(ReadText(file));
  } catch (const json::parse_error& e) {
    throw reeflabel::ImportError(fmt::format("{}: {}", file.string(), e.what()));
  }
  auto tx = store->Begin();
  const auto summary = reeflabel::ImportBoxes(tx, doc);
  store->Commit(std::move(tx));
  PrintImportSummary(summary);
  return 0;
}

int CmdImportDots(const fs::path& store_dir, const fs::path& file, double half_extent) {
  auto store = OpenExistingStore(store_dir);
  auto tx = store->Begin();
  const auto summary = reeflabel::ImportDots(tx, ReadText(file), half_extent);
  store->Commit(std::move(tx));
  PrintImportSummary(summary);
  return 0;
}

int CmdRunSim(const fs::path& config_path, const std::string& out_override) {
  auto cfg = reeflabel::LoadRunConfig(config_path);
  if (!out_override.empty()) cfg.output_dir = out_override;
  const auto start = std::chrono::steady_clock::now();
  const auto outcome = reeflabel::RunSimulation(cfg, cfg.output_dir);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << reeflabel::SummaryTable(outcome.reports);
  std::cout << fmt::format("converged: {}  loops: {}  config_hash: {}  elapsed: {:.1f}s\n",
                           outcome.converged ? "yes" : "no", outcome.reports.size(),
                           reeflabel::ConfigHash(cfg), secs);
  std::cout << "artifacts: " << fs::path(cfg.output_dir).string() << "\n";
  return 0;
}

int CmdAblation(const fs::path& config_path, const std::vector<std::uint64_t>& seeds,
                const std::string& out_file) {
  const auto cfg = reeflabel::LoadRunConfig(config_path);
  const auto result = reeflabel::PrecisionAblation(cfg, seeds);
  for (const auto& s : result.seeds) {
    std::string line = fmt::format("seed {:>4}:", s.seed);
    for (const auto& [cls, on] : s.precision_on) {
      line += fmt::format("  {} on={:.4f} off={:.4f}", cls, on, s.precision_off.at(cls));
    }
    std::cout << line << (s.on_at_least_off ? "  [on >= off]" : "  [on < off]") << "\n";
  }
  std::cout << fmt::format("seeds with background training at least as precise: {}/{}\n",
                           result.seeds_on_at_least_off, result.seeds.size());
  if (!out_file.empty()) WriteText(out_file, result.ToJson().dump(2) + "\n");
  return 0;
}

int CmdServe(const fs::path& config_path, const fs::path& store_dir, const std::string& host,
             int port) {
  const auto cfg = reeflabel::LoadRunConfig(config_path);
  fs::create_directories(store_dir);
  reeflabel::StoreLock lock(store_dir);
  auto store = reeflabel::LabelStore::Open(store_dir);
  reeflabel::TaskService service(*store, cfg.crowd, reeflabel::DeriveSeed(cfg.seed, "serve"));
  const auto published = service.PublishPending();
  spdlog::info("published {} pending annotations", published);

  reeflabel::HttpServer server(service, {host, port});
  std::signal(SIGINT, HandleSignal);
  std::signal(SIGTERM, HandleSignal);
  const int bound = server.Start();
  std::cout << json{{"listening", fmt::format("http://{}:{}", host, bound)}}.dump() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  spdlog::info("shutting down");
  server.Stop();
  store->WriteSnapshot();
  return 0;
}

int CmdReport(const fs::path& run_dir, bool as_json, bool verify) {
  const auto check = reeflabel::VerifyRun(run_dir);
  const auto& reports = check.reports;
  if (as_json) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(r.ToJson());
    std::cout << arr.dump(2) << "\n";
  } else {
    std::cout << reeflabel::SummaryTable(reports);
  }
  if (!verify) return 0;
  for (const auto& name : check.mismatches) std::cerr << "mismatch: " << name << "\n";
  if (!check.mismatches.empty()) {
    throw reeflabel::IntegrityError(fmt::format(
        "{} report file(s) differ from the replayed event log", check.mismatches.size()));
  }
  std::cout << fmt::format("verified: {} loop reports byte-identical to replay\n", reports.size());
  return 0;
}

int CmdExport(const fs::path& store_dir, const std::string& states, bool include_background,
              const std::string& out_file) {
  auto store = OpenExistingStore(store_dir);
  reeflabel::ExportOptions opts;
  opts.states = reeflabel::ParseStateList(states);
  opts.include_background = include_background;
  const auto text = reeflabel::SerializeBoxes(reeflabel::ExportBoxes(store->Snapshot(), opts));
  if (out_file.empty() || out_file == "-") {
    std::cout << text;
  } else {
    WriteText(out_file, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("reeflabel"));

  CLI::App app{"reeflabel: iterative crowd-assisted bounding-box labeling"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  fs::path store_dir = "store";
  fs::path file;
  fs::path config_path;
  std::string out;
  double half_extent = reeflabel::kDefaultSeedHalfExtent;
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path run_dir;
  bool as_json = false;
  bool verify = false;
  std::string states = "approved,seed";
  bool include_background = false;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  auto* init = app.add_subcommand("init", "Create an empty label store");
  init->add_option("--store", store_dir, "Store directory")->required();

  auto* import_boxes = app.add_subcommand("import-boxes", "Import a box-JSON document as Seed");
  import_boxes->add_option("--store", store_dir, "Store directory")->required();
  import_boxes->add_option("file", file, "box-JSON file")->required();

  auto* import_dots = app.add_subcommand("import-dots", "Import a dot-CSV as boxes to tighten");
  import_dots->add_option("--store", store_dir, "Store directory")->required();
  import_dots->add_option("file", file, "dot-CSV file (image_id,x,y,class_label)")->required();
  import_dots->add_option("--half-extent", half_extent, "Half side of the seeded box in pixels");

  auto* run_sim = app.add_subcommand("run-sim", "Run the simulated labeling loop");
  run_sim->add_option("--config", config_path, "TOML run config")->required();
  run_sim->add_option("--out", out, "Output directory (overrides run.output_dir)");

  auto* ablation =
      app.add_subcommand("ablation", "Background-training precision ablation over seeds");
  ablation->add_option("--config", config_path, "TOML run config")->required();
  ablation->add_option("--seeds", seeds, "Seeds")->delimiter(',');
  ablation->add_option("--out", out, "Write the paired results as JSON");

  auto* serve = app.add_subcommand("serve", "Serve /api/v1 over a label store");
  serve->add_option("--config", config_path, "TOML run config (crowd settings, seed)")
      ->required();
  serve->add_option("--store", store_dir, "Store directory")->required();
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  auto* report = app.add_subcommand("report", "Replay a run's event log into loop reports");
  report->add_option("--run", run_dir, "Run output directory")->required();
  report->add_flag("--json", as_json, "Emit the reports as JSON");
  report->add_flag("--verify", verify, "Check written reports are byte-identical to the replay");

  auto* export_cmd = app.add_subcommand("export", "Export annotations as box-JSON");
  export_cmd->add_option("--store", store_dir, "Store directory")->required();
  export_cmd->add_option("--states", states, "Comma-separated states");
  export_cmd->add_flag("--include-background", include_background);
  export_cmd->add_option("--out", out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    PrintError("usage", e.what());
    return ExitCodeFor("usage");
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*init) return CmdInit(store_dir);
    if (*import_boxes) return CmdImportBoxes(store_dir, file);
    if (*import_dots) return CmdImportDots(store_dir, file, half_extent);
    if (*run_sim) return CmdRunSim(config_path, out);
    if (*ablation) return CmdAblation(config_path, seeds, out);
    if (*serve) return CmdServe(config_path, store_dir, host, port);
    if (*report) return CmdReport(run_dir, as_json, verify);
    if (*export_cmd) return CmdExport(store_dir, states, include_background, out);
  } catch (const reeflabel::Error& e) {
    PrintError(e.kind(), e.what());
    return ExitCodeFor(e.kind());
  } catch (const std::exception& e) {
    PrintError("internal", e.what());
    return 1;
  }
  return 0;
}
