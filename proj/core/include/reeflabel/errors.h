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

#include <stdexcept>
#include <string>
#include <string_view>

namespace reeflabel {

// Base of every error raised by the library. `kind()` is a stable,
// machine-parsable tag surfaced by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& message)
      : Error("precondition", message) {}
};

// A single input record that cannot be ingested (e.g. a dot outside its image).
class RejectedRecordError : public Error {
 public:
  explicit RejectedRecordError(const std::string& message)
      : Error("rejected_record", message) {}
};

class ImportError : public Error {
 public:
  explicit ImportError(const std::string& message) : Error("import", message) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& message) : Error("state", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Simulation invariants broken (e.g. a subtask points at nothing in the hidden world).
class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& message)
      : Error("integrity", message) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error("numeric", message) {}
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message)
      : Error("not_found", message) {}
};

}  // namespace reeflabel
