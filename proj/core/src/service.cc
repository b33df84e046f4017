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

#include "reeflabel/service.h"

#include <fcntl.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "reeflabel/errors.h"

namespace reeflabel {

using nlohmann::json;

namespace {

json BoxJson(const BBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

ApiResponse ErrorResponse(int status, const std::string& kind, const std::string& message) {
  return {status, {{"error", {{"kind", kind}, {"message", message}}}}};
}

TimestampMs SystemNowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

json HitToJson(const Hit& hit, const Dataset& dataset, TimestampMs expiry) {
  json subtasks = json::array();
  for (std::size_t i = 0; i < hit.subtasks.size(); ++i) {
    const auto& st = hit.subtasks[i];
    const auto* image = dataset.FindImage(st.image_id);
    subtasks.push_back({{"index", i},
                        {"image_id", st.image_id},
                        {"image_uri", image ? image->uri : ""},
                        {"crop_viewport", BoxJson(st.crop_viewport)},
                        {"proposed_box", BoxJson(st.proposed_box)},
                        {"proposed_class", st.proposed_class}});
  }
  json classes = dataset.catalog().names();
  classes.push_back(kBackground);
  return {{"hit_id", hit.hit_id},
          {"lease_expiry_ms", expiry},
          {"classes", classes},
          {"subtasks", subtasks}};
}

WorkerAnswer ParseWorkerAnswer(const json& body, const Hit& hit, const ClassCatalog& catalog) {
  if (!body.is_object() || !body.contains("answers") || !body["answers"].is_array()) {
    throw PreconditionError("body must be an object with an 'answers' array");
  }
  const auto& arr = body["answers"];
  if (arr.size() != hit.subtasks.size()) {
    throw PreconditionError(fmt::format("expected {} answers, got {}", hit.subtasks.size(),
                                        arr.size()));
  }
  WorkerAnswer answer;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& a = arr[i];
    if (!a.is_object() || !a.contains("box") || !a["box"].is_array() || a["box"].size() != 4 ||
        !a.contains("class") || !a["class"].is_string()) {
      throw PreconditionError(
          fmt::format("answers[{}] needs 'box' [x_min,y_min,x_max,y_max] and 'class'", i));
    }
    for (const auto& v : a["box"]) {
      if (!v.is_number()) throw PreconditionError(fmt::format("answers[{}]: box must be numeric", i));
    }
    const BBox box{a["box"][0].get<double>(), a["box"][1].get<double>(),
                   a["box"][2].get<double>(), a["box"][3].get<double>()};
    if (!box.IsValid()) {
      throw PreconditionError(fmt::format("answers[{}]: box {} is not a valid box", i,
                                          ToString(box)));
    }
    const auto cls = a["class"].get<std::string>();
    if (!catalog.Accepts(cls)) {
      throw PreconditionError(fmt::format("answers[{}]: unknown class '{}'", i, cls));
    }
    answer.answers.push_back({box, cls});
  }
  return answer;
}

TaskService::TaskService(LabelStore& store, CrowdConfig cfg, std::uint64_t seed, Clock clock)
    : store_(store), cfg_(cfg), clock_(clock ? std::move(clock) : Clock(SystemNowMs)) {
  session_ = std::make_unique<CrowdSession>(cfg_, store_.Snapshot(), seed, "hit-");
}

std::size_t TaskService::PublishPending() {
  std::lock_guard lock(write_mu_);
  auto tx = store_.Begin();
  const auto n = session_->PublishPending(tx);
  store_.Commit(std::move(tx));
  return n;
}

ApiResponse TaskService::NextHit(const std::string& worker_id) {
  if (worker_id.empty()) return ErrorResponse(400, "precondition", "worker_id is required");
  auto hit = session_->Lease(worker_id, clock_());
  if (!hit) return {204, nullptr};
  return {200, HitToJson(*hit, store_.Snapshot(), hit->lease ? hit->lease->expiry : 0)};
}

ApiResponse TaskService::SubmitAnswers(const std::string& hit_id, const json& body) {
  const auto hit = session_->pool().Find(hit_id);
  if (!hit) return ErrorResponse(404, "not_found", fmt::format("unknown hit '{}'", hit_id));
  if (!body.is_object() || !body.contains("worker_id") || !body["worker_id"].is_string()) {
    return ErrorResponse(400, "precondition", "worker_id is required");
  }
  const auto worker_id = body["worker_id"].get<std::string>();
  WorkerAnswer answer;
  try {
    answer = ParseWorkerAnswer(body, *hit, store_.Snapshot().catalog());
  } catch (const PreconditionError& e) {
    return ErrorResponse(400, "validation", e.what());
  }
  std::lock_guard lock(write_mu_);
  auto tx = store_.Begin();
  const auto result = session_->Submit(tx, hit_id, worker_id, answer, clock_());
  store_.Commit(std::move(tx));
  const std::string status(ToString(result.status));
  if (result.status == SubmitResult::Status::kStale) {
    return {409, {{"status", status}, {"reason", result.reason}}};
  }
  return {200, {{"status", status}}};
}

ApiResponse TaskService::Progress() const {
  const auto ds = store_.Snapshot();
  json classes = json::object();
  for (const auto& [state_name, state] :
       {std::pair{"seed", AnnotationState::kSeed}, std::pair{"approved", AnnotationState::kApproved},
        std::pair{"predicted", AnnotationState::kPredicted},
        std::pair{"pending_review", AnnotationState::kPendingReview},
        std::pair{"republished", AnnotationState::kRepublished},
        std::pair{"rejected", AnnotationState::kRejected}}) {
    for (const auto& [cls, n] : ClassCounts(ds, {state})) {
      if (IsBackground(cls)) continue;
      classes[cls][state_name] = n;
    }
  }
  const auto& pool = session_->pool();
  return {200,
          {{"classes", classes},
           {"background_confirmed",
            ds.AnnotationsInStates({AnnotationState::kBackgroundConfirmed}).size()},
           {"hits_open_or_leased", pool.open_or_leased()},
           {"buffered_subtasks", pool.buffered()}}};
}

ApiResponse TaskService::Examples(const std::string& class_label, std::size_t limit) const {
  const auto ds = store_.Snapshot();
  if (!ds.catalog().Contains(class_label)) {
    return ErrorResponse(404, "not_found", fmt::format("unknown class '{}'", class_label));
  }
  // Only worker-approved labels: Seed boxes double as hidden gold.
  json examples = json::array();
  for (const auto* a : ds.AnnotationsInStates({AnnotationState::kApproved})) {
    if (a->class_label != class_label) continue;
    const auto* image = ds.FindImage(a->image_id);
    examples.push_back(
        {{"image_id", a->image_id}, {"image_uri", image->uri}, {"box", BoxJson(a->box)}});
    if (examples.size() >= limit) break;
  }
  return {200, {{"class", class_label}, {"examples", examples}}};
}

void TaskService::Mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/api/v1/hits/next", [this, reply](const httplib::Request& req,
                                                 httplib::Response& res) {
    reply(res, NextHit(req.get_param_value("worker_id")));
  });
  server.Post(R"(/api/v1/hits/([^/]+)/answers)",
              [this, reply](const httplib::Request& req, httplib::Response& res) {
                json body;
                try {
                  body = json::parse(req.body);
                } catch (const json::parse_error& e) {
                  reply(res, ErrorResponse(400, "validation", e.what()));
                  return;
                }
                reply(res, SubmitAnswers(req.matches[1], body));
              });
  server.Get("/api/v1/progress", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, Progress());
  });
  server.Get(R"(/api/v1/examples/([^/]+))",
             [this, reply](const httplib::Request& req, httplib::Response& res) {
               reply(res, Examples(req.matches[1]));
             });
  server.set_exception_handler(
      [reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        try {
          std::rethrow_exception(ep);
        } catch (const Error& e) {
          reply(res, ErrorResponse(e.kind() == "not_found" ? 404 : 400, e.kind(), e.what()));
        } catch (const std::exception& e) {
          reply(res, ErrorResponse(500, "internal", e.what()));
        }
      });
}

// --- StoreLock / HttpServer -------------------------------------------------------

StoreLock::StoreLock(std::filesystem::path dir) : path_(std::move(dir) / "LOCK") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw StateError(fmt::format("store is locked ({}): {}", path_.string(),
                                 std::strerror(errno)));
  }
  const auto pid = std::to_string(::getpid());
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

StoreLock::~StoreLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

HttpServer::HttpServer(TaskService& service, ServeOptions options)
    : service_(service), options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()) {
  // httplib's default also sets SO_REUSEPORT, which would let a second server
  // share a busy port instead of failing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  service_.Mount(*server_);
}

HttpServer::~HttpServer() { Stop(); }

void HttpServer::Run() {
  if (!server_->bind_to_port(options_.host, options_.port)) {
    throw StateError(fmt::format("cannot bind {}:{} (port busy?)", options_.host, options_.port));
  }
  spdlog::info("serving /api/v1 on {}:{}", options_.host, options_.port);
  server_->listen_after_bind();
}

int HttpServer::Start() {
  const int port = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                                      : (server_->bind_to_port(options_.host, options_.port)
                                             ? options_.port
                                             : -1);
  if (port < 0) {
    throw StateError(fmt::format("cannot bind {}:{} (port busy?)", options_.host, options_.port));
  }
  thread_ = std::make_unique<std::thread>([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void HttpServer::Stop() {
  if (server_) server_->stop();
  if (thread_ && thread_->joinable()) thread_->join();
  thread_.reset();
}

}  // namespace reeflabel
