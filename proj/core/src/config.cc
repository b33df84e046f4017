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

#include "reeflabel/config.h"

#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "reeflabel/errors.h"
#include "reeflabel/rng.h"

namespace reeflabel {

using nlohmann::json;

// --- TOML subset --------------------------------------------------------------

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  json Parse() {
    json root = json::object();
    json* table = &root;
    std::set<std::string> headers;
    std::size_t pos = 0;
    while (pos <= text_.size()) {
      const auto end = text_.find('\n', pos);
      std::string_view line =
          text_.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
      ++line_no_;
      pos = end == std::string_view::npos ? text_.size() + 1 : end + 1;
      line = Trim(line);
      if (line.empty() || line.front() == '#') continue;
      if (line.front() == '[') {
        const auto close = line.find(']');
        if (close == std::string_view::npos) Fail("unterminated table header");
        if (!Trim(StripComment(line.substr(close + 1))).empty()) {
          Fail("unexpected text after table header");
        }
        const std::string name(Trim(line.substr(1, close - 1)));
        if (name.empty()) Fail("empty table name");
        if (!headers.insert(name).second) Fail(fmt::format("duplicate table [{}]", name));
        table = &root;
        std::size_t start = 0;
        while (true) {
          const auto dot = name.find('.', start);
          const auto part = Trim(std::string_view(name).substr(
              start, dot == std::string::npos ? std::string::npos : dot - start));
          CheckBareKey(part);
          json& child = (*table)[std::string(part)];
          if (child.is_null()) child = json::object();
          if (!child.is_object()) Fail(fmt::format("'{}' is not a table", part));
          table = &child;
          if (dot == std::string::npos) break;
          start = dot + 1;
        }
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) Fail("expected 'key = value'");
      const auto key = Trim(line.substr(0, eq));
      CheckBareKey(key);
      std::string_view rest = Trim(line.substr(eq + 1));
      json value = ParseValue(rest);
      rest = Trim(StripComment(rest));
      if (!rest.empty()) Fail(fmt::format("unexpected text '{}' after value", rest));
      if (table->contains(std::string(key))) Fail(fmt::format("duplicate key '{}'", key));
      (*table)[std::string(key)] = std::move(value);
    }
    return root;
  }

 private:
  [[noreturn]] void Fail(const std::string& msg) const {
    throw ConfigError(fmt::format("config line {}: {}", line_no_, msg));
  }

  static std::string_view Trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  }

  // Drops a trailing comment that is not inside a string.
  static std::string_view StripComment(std::string_view s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
      if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
  }

  void CheckBareKey(std::string_view key) const {
    if (key.empty()) Fail("empty key");
    for (char c : key) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) {
        Fail(fmt::format("invalid key '{}'", key));
      }
    }
  }

  json ParseValue(std::string_view& s) {
    s = Trim(s);
    if (s.empty()) Fail("missing value");
    if (s.front() == '"') return ParseString(s);
    if (s.front() == '[') {
      s.remove_prefix(1);
      json arr = json::array();
      while (true) {
        s = Trim(s);
        if (s.empty()) Fail("unterminated array (arrays must fit on one line)");
        if (s.front() == ']') {
          s.remove_prefix(1);
          return arr;
        }
        arr.push_back(ParseValue(s));
        s = Trim(s);
        if (!s.empty() && s.front() == ',') {
          s.remove_prefix(1);
        } else if (s.empty() || s.front() != ']') {
          Fail("expected ',' or ']' in array");
        }
      }
    }
    std::size_t n = 0;
    while (n < s.size() && s[n] != ',' && s[n] != ']' && s[n] != '#' &&
           !std::isspace(static_cast<unsigned char>(s[n]))) {
      ++n;
    }
    const auto token = s.substr(0, n);
    s.remove_prefix(n);
    if (token == "true") return true;
    if (token == "false") return false;
    const bool looks_float = token.find_first_of(".eE") != std::string_view::npos ||
                             token == "inf" || token == "nan";
    if (!looks_float) {
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec == std::errc() && ptr == token.data() + token.size()) return v;
    } else {
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec == std::errc() && ptr == token.data() + token.size()) return v;
    }
    Fail(fmt::format("cannot parse value '{}'", token));
  }

  json ParseString(std::string_view& s) {
    std::string out;
    std::size_t i = 1;
    for (; i < s.size() && s[i] != '"'; ++i) {
      if (s[i] != '\\') {
        out += s[i];
        continue;
      }
      if (++i >= s.size()) break;
      switch (s[i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: Fail(fmt::format("unsupported escape '\\{}'", s[i]));
      }
    }
    if (i >= s.size()) Fail("unterminated string");
    s.remove_prefix(i + 1);
    return out;
  }

  std::string_view text_;
  int line_no_ = 0;
};

// --- Binding ------------------------------------------------------------------

std::string_view ToString(EmptyBatchPolicy p) {
  return p == EmptyBatchPolicy::kError ? "error" : "zero_with_warning";
}

EmptyBatchPolicy ParseEmptyBatch(std::string_view s) {
  if (s == "error") return EmptyBatchPolicy::kError;
  if (s == "zero_with_warning") return EmptyBatchPolicy::kZeroWithWarning;
  throw ConfigError(fmt::format("unknown empty_batch policy '{}'", s));
}

// One description of the schema, walked by both the reader and the writer.
template <class V>
void VisitConfig(V& v, RunConfig& c) {
  v.Table("run");
  v("seed", c.seed);
  v("mode", c.mode);
  v("max_loops", c.max_loops);
  v("epsilon", c.epsilon);
  v("patience", c.patience);
  v("stop_on_convergence", c.stop_on_convergence);
  v("publish_threshold", c.publish_threshold);
  v("dedup_iou", c.dedup_iou);
  v("train_epochs", c.train_epochs);
  v("background_training", c.background_training);
  v("max_rounds", c.max_rounds);
  v("seed_half_extent", c.seed_half_extent);
  v("feature_noise", c.feature_noise);
  v("output_dir", c.output_dir);

  v.Table("data");
  v.Path("hidden_world", c.hidden_world);
  v.Path("seed_boxes", c.seed_boxes);
  v.Path("dots", c.dots);

  auto& s = c.scenario;
  v.Table("scenario");
  v("images", s.images);
  v("width", s.width);
  v("height", s.height);
  v("classes", s.classes);
  v("class_weights", s.class_weights);
  v("objects_min", s.objects_min);
  v("objects_max", s.objects_max);
  v("min_size", s.min_size);
  v("max_size", s.max_size);
  v("max_overlap_iou", s.max_overlap_iou);
  v("seed_images", s.seed_images);
  v("undotted_fraction", s.undotted_fraction);

  auto& g = c.crowd;
  v.Table("crowd");
  v("hit_size", g.hit_size);
  v("approval_threshold", g.approval_threshold);
  v("require_gold_class", g.require_gold_class);
  v("lease_duration_ms", g.lease_duration_ms);
  v("soft_block_after", g.soft_block_after);
  v("viewport_scale", g.viewport_scale);
  v("gold_proposal_jitter", g.gold_proposal_jitter);
  v("max_publish_count", g.max_publish_count);
  v("distinct_reviewers", g.distinct_reviewers);
  v("gold_from_approved", g.gold_from_approved);

  auto& t = c.trainer;
  v.Table("trainer");
  v("ignore_threshold", t.ignore_threshold);
  v("ignore_rule", t.ignore_rule);
  v("minibatch_size", t.minibatch_size);
  v("positive_fraction", t.positive_fraction);
  v("lambda", t.lambda);
  v("match_iou_pos", t.match_iou_pos);
  v("match_iou_neg", t.match_iou_neg);
  v("learning_rate", t.learning_rate);
  v("divergence_limit", t.divergence_limit);
  v("clamp_epsilon", t.clamp_epsilon);
  v("empty_batch", t.empty_batch);
  v.Table("trainer.anchors");
  v("stride", t.anchors.stride);
  v("scales", t.anchors.scales);
  v("ratios", t.anchors.ratios);
  v.Table("trainer.augment");
  v("enabled", t.augment.enabled);
  v("flip_horizontal", t.augment.flip_horizontal);
  v("flip_vertical", t.augment.flip_vertical);
  v("brightness_min", t.augment.brightness_min);
  v("brightness_max", t.augment.brightness_max);
  v("crop_min", t.augment.crop_min);
  v("crop_max", t.augment.crop_max);
  v("min_retained_area", t.augment.min_retained_area);

  auto& d = c.detector;
  v.Table("detector");
  v("p_min", d.p_min);
  v("p_max", d.p_max);
  v("box_jitter_sigma", d.box_jitter_sigma);
  v("fp_rate0", d.fp_rate0);
  v("fp_decay_beta", d.fp_decay_beta);
  v("class_confusion", d.class_confusion);
  v("true_score_alpha", d.true_score_alpha);
  v("true_score_beta", d.true_score_beta);
  v("fp_score_alpha", d.fp_score_alpha);
  v("fp_score_beta", d.fp_score_beta);
  v("fp_min_size", d.fp_min_size);
  v("fp_max_size", d.fp_max_size);

  auto& w = c.workers;
  v.Table("workers");
  v("size", w.size);
  v("diligent_fraction", w.diligent_fraction);
  v("careless_fraction", w.careless_fraction);
  v("spammer_fraction", w.spammer_fraction);
  for (auto [name, profile] : {std::pair{"workers.diligent", &w.diligent},
                               std::pair{"workers.careless", &w.careless},
                               std::pair{"workers.spammer", &w.spammer}}) {
    v.Table(name);
    v("box_noise", profile->box_noise);
    v("class_accuracy", profile->class_accuracy);
    v("background_detection_accuracy", profile->background_detection_accuracy);
  }
}

class Reader {
 public:
  Reader(const json& doc, std::filesystem::path base) : doc_(doc), base_(std::move(base)) {}

  void Table(std::string name) { table_ = std::move(name); }

  template <class T>
  void operator()(const char* key, T& out) {
    const json* node = Find(key);
    if (!node) return;
    Assign(*node, out, Where(key));
  }

  void Path(const char* key, std::string& out) {
    (*this)(key, out);
    if (!out.empty() && !base_.empty() && std::filesystem::path(out).is_relative()) {
      out = (base_ / out).lexically_normal().string();
    }
  }

  // Rejects every leaf or table the schema walk did not visit.
  void CheckUnknown() const { Walk(doc_, ""); }

 private:
  std::string Where(const char* key) const { return fmt::format("[{}] {}", table_, key); }

  const json* Find(const char* key) {
    visited_.insert(table_ + "." + key);
    tables_.insert(table_);
    for (std::size_t p = table_.find('.'); p != std::string::npos; p = table_.find('.', p + 1)) {
      tables_.insert(table_.substr(0, p));
    }
    const json* node = &doc_;
    std::size_t start = 0;
    while (true) {
      const auto dot = table_.find('.', start);
      const auto part = table_.substr(start, dot == std::string::npos ? std::string::npos
                                                                      : dot - start);
      if (!node->is_object() || !node->contains(part)) return nullptr;
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    if (!node->is_object() || !node->contains(key)) return nullptr;
    return &(*node)[key];
  }

  void Walk(const json& node, const std::string& path) const {
    for (const auto& [k, child] : node.items()) {
      const auto full = path.empty() ? k : path + "." + k;
      if (child.is_object()) {
        if (!tables_.count(full)) throw ConfigError(fmt::format("unknown config table [{}]", full));
        Walk(child, full);
      } else if (!visited_.count(full)) {
        throw ConfigError(fmt::format("unknown config key '{}'", full));
      }
    }
  }

  [[noreturn]] static void TypeError(const std::string& where, const char* expected) {
    throw ConfigError(fmt::format("{}: expected {}", where, expected));
  }

  static void Assign(const json& j, int& out, const std::string& where) {
    if (!j.is_number_integer()) TypeError(where, "an integer");
    out = j.get<int>();
  }
  static void Assign(const json& j, std::int64_t& out, const std::string& where) {
    if (!j.is_number_integer()) TypeError(where, "an integer");
    out = j.get<std::int64_t>();
  }
  static void Assign(const json& j, std::uint64_t& out, const std::string& where) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
      TypeError(where, "a non-negative integer");
    }
    out = j.get<std::uint64_t>();
  }
  static void Assign(const json& j, double& out, const std::string& where) {
    if (!j.is_number()) TypeError(where, "a number");
    out = j.get<double>();
  }
  static void Assign(const json& j, bool& out, const std::string& where) {
    if (!j.is_boolean()) TypeError(where, "true or false");
    out = j.get<bool>();
  }
  static void Assign(const json& j, std::string& out, const std::string& where) {
    if (!j.is_string()) TypeError(where, "a string");
    out = j.get<std::string>();
  }
  static void Assign(const json& j, std::vector<double>& out, const std::string& where) {
    if (!j.is_array()) TypeError(where, "an array of numbers");
    out.clear();
    for (const auto& e : j) {
      if (!e.is_number()) TypeError(where, "an array of numbers");
      out.push_back(e.get<double>());
    }
  }
  static void Assign(const json& j, std::vector<std::string>& out, const std::string& where) {
    if (!j.is_array()) TypeError(where, "an array of strings");
    out.clear();
    for (const auto& e : j) {
      if (!e.is_string()) TypeError(where, "an array of strings");
      out.push_back(e.get<std::string>());
    }
  }
  static void Assign(const json& j, RunMode& out, const std::string& where) {
    if (!j.is_string()) TypeError(where, "a mode name");
    out = ParseRunMode(j.get<std::string>());
  }
  static void Assign(const json& j, EmptyBatchPolicy& out, const std::string& where) {
    if (!j.is_string()) TypeError(where, "a policy name");
    out = ParseEmptyBatch(j.get<std::string>());
  }

  const json& doc_;
  std::filesystem::path base_;
  std::string table_;
  std::set<std::string> visited_;
  std::set<std::string> tables_;
};

class Writer {
 public:
  void Table(const std::string& name) {
    node_ = &root_;
    std::size_t start = 0;
    while (true) {
      const auto dot = name.find('.', start);
      node_ = &(*node_)[name.substr(start, dot == std::string::npos ? std::string::npos
                                                                    : dot - start)];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
  }
  template <class T>
  void operator()(const char* key, const T& value) {
    (*node_)[key] = value;
  }
  void operator()(const char* key, const RunMode& value) {
    (*node_)[key] = std::string(ToString(value));
  }
  void operator()(const char* key, const EmptyBatchPolicy& value) {
    (*node_)[key] = std::string(ToString(value));
  }
  void Path(const char* key, const std::string& value) { (*node_)[key] = value; }

  json Take() { return std::move(root_); }

 private:
  json root_ = json::object();
  json* node_ = &root_;
};

}  // namespace

json ParseToml(std::string_view text) { return TomlParser(text).Parse(); }

std::string_view ToString(RunMode mode) {
  return mode == RunMode::kFromSeed ? "from_seed" : "legacy_dots";
}

RunMode ParseRunMode(std::string_view name) {
  if (name == "from_seed") return RunMode::kFromSeed;
  if (name == "legacy_dots") return RunMode::kLegacyDots;
  throw ConfigError(fmt::format("unknown run mode '{}' (expected from_seed or legacy_dots)",
                                name));
}

RunConfig RunConfigFromJson(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config document must be a table");
  RunConfig cfg;
  Reader reader(doc, base_dir);
  VisitConfig(reader, cfg);
  reader.CheckUnknown();
  Validate(cfg);
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return RunConfigFromJson(ParseToml(buf.str()), path.parent_path());
}

RunConfig ParseRunConfig(std::string_view toml_text) {
  return RunConfigFromJson(ParseToml(toml_text));
}

json RunConfigToJson(const RunConfig& cfg) {
  Writer writer;
  RunConfig copy = cfg;
  VisitConfig(writer, copy);
  return writer.Take();
}

std::string ConfigHash(const RunConfig& cfg) {
  return fmt::format("{:016x}", StableHash(RunConfigToJson(cfg).dump()));
}

void Validate(const RunConfig& cfg) {
  if (cfg.max_loops < 0) throw ConfigError("[run] max_loops must be >= 0");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("[run] epsilon must be > 0");
  if (cfg.patience < 1) throw ConfigError("[run] patience must be >= 1");
  if (!(cfg.publish_threshold >= 0.0 && cfg.publish_threshold < 1.0)) {
    throw ConfigError("[run] publish_threshold must lie in [0, 1)");
  }
  if (!(cfg.dedup_iou > 0.0 && cfg.dedup_iou < 1.0)) {
    throw ConfigError("[run] dedup_iou must lie in (0, 1)");
  }
  if (cfg.train_epochs < 0 || cfg.max_rounds < 1) {
    throw ConfigError("[run] train_epochs must be >= 0 and max_rounds >= 1");
  }
  if (!(cfg.seed_half_extent > 0.0)) throw ConfigError("[run] seed_half_extent must be > 0");
  const auto& s = cfg.scenario;
  if (s.images < 1 || s.seed_images < 0 || s.seed_images > s.images) {
    throw ConfigError("[scenario] needs images >= 1 and 0 <= seed_images <= images");
  }
  if (s.classes.empty() || s.classes.size() != s.class_weights.size()) {
    throw ConfigError("[scenario] classes and class_weights must be non-empty and aligned");
  }
  for (double w : s.class_weights) {
    if (!(w > 0.0)) throw ConfigError("[scenario] class weights must be > 0");
  }
  if (s.objects_min < 0 || s.objects_max < s.objects_min) {
    throw ConfigError("[scenario] objects_min/objects_max out of order");
  }
  if (!(s.min_size > 0.0 && s.min_size <= s.max_size && s.max_size <= std::min(s.width, s.height))) {
    throw ConfigError("[scenario] object size range must fit the image");
  }
  if (s.undotted_fraction < 0.0 || s.undotted_fraction > 1.0) {
    throw ConfigError("[scenario] undotted_fraction must lie in [0, 1]");
  }
  const auto& g = cfg.crowd;
  if (g.hit_size < 2) throw ConfigError("[crowd] hit_size must be >= 2");
  if (!(g.approval_threshold > 0.0 && g.approval_threshold < 1.0)) {
    throw ConfigError("[crowd] approval_threshold must lie in (0, 1)");
  }
  if (g.lease_duration_ms <= 0 || g.soft_block_after < 1 || g.max_publish_count < 2 ||
      !(g.viewport_scale >= 1.0) || g.gold_proposal_jitter < 0.0) {
    throw ConfigError("[crowd] values out of range");
  }
  Validate(cfg.trainer);
  Validate(cfg.detector);
  Validate(cfg.workers);
}

}  // namespace reeflabel
