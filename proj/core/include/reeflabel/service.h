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
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "reeflabel/crowdgate.h"
#include "reeflabel/labelstore.h"

namespace httplib {
class Server;
}

namespace reeflabel {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;  // null for 204
};

// Transport-independent /api/v1 handlers over a label store. Every mutation
// runs through CrowdSession inside a store transaction, the same path the
// in-process simulator uses.
class TaskService {
 public:
  using Clock = std::function<TimestampMs()>;

  TaskService(LabelStore& store, CrowdConfig cfg, std::uint64_t seed, Clock clock = {});

  // Publishes every Predicted/Republished annotation; returns how many.
  std::size_t PublishPending();

  // GET /api/v1/hits/next?worker_id=...
  ApiResponse NextHit(const std::string& worker_id);
  // POST /api/v1/hits/{id}/answers
  ApiResponse SubmitAnswers(const std::string& hit_id, const nlohmann::json& body);
  // GET /api/v1/progress
  ApiResponse Progress() const;
  // GET /api/v1/examples/{class}
  ApiResponse Examples(const std::string& class_label, std::size_t limit = 12) const;

  // Registers the routes on an httplib server.
  void Mount(httplib::Server& server);

  CrowdSession& session() { return *session_; }

 private:
  LabelStore& store_;
  CrowdConfig cfg_;
  Clock clock_;
  std::mutex write_mu_;
  std::unique_ptr<CrowdSession> session_;
};

// Worker-facing HIT encoding: no annotation ids, gold flags or gold boxes.
nlohmann::json HitToJson(const Hit& hit, const Dataset& dataset, TimestampMs expiry);

// Parses a WorkerAnswer body. Throws PreconditionError describing the first
// problem (wrong count, malformed box, unknown class).
WorkerAnswer ParseWorkerAnswer(const nlohmann::json& body, const Hit& hit,
                               const ClassCatalog& catalog);

// Exclusive lock file guarding a store directory against a second server.
class StoreLock {
 public:
  explicit StoreLock(std::filesystem::path dir);
  ~StoreLock();
  StoreLock(const StoreLock&) = delete;
  StoreLock& operator=(const StoreLock&) = delete;

 private:
  std::filesystem::path path_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// Blocks until Stop() is called from another thread or a signal handler.
class HttpServer {
 public:
  HttpServer(TaskService& service, ServeOptions options);
  ~HttpServer();

  // Binds the port (StateError when busy) and serves until stopped.
  void Run();
  // Binds and serves on a background thread; returns the bound port.
  int Start();
  void Stop();

 private:
  TaskService& service_;
  ServeOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::unique_ptr<std::thread> thread_;
};

}  // namespace reeflabel
