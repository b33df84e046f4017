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

#include <fstream>

#include <gtest/gtest.h>

#include "reeflabel/errors.h"
#include "test_support.h"

namespace reeflabel {
namespace {

std::string ConfigError_(std::string_view text) {
  try {
    ParseRunConfig(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(TomlTest, SubsetValues) {
  const auto j = ParseToml(R"(
# comment
top = 1
[a]
s = "x # not a comment"   # trailing comment
f = 0.25
neg = -3
b = true
arr = [1, 2.5, "z"]
[a.sub]
k = false
)");
  EXPECT_EQ(j["top"], 1);
  EXPECT_EQ(j["a"]["s"], "x # not a comment");
  EXPECT_EQ(j["a"]["f"], 0.25);
  EXPECT_EQ(j["a"]["neg"], -3);
  EXPECT_EQ(j["a"]["b"], true);
  EXPECT_EQ(j["a"]["arr"], nlohmann::json::array({1, 2.5, "z"}));
  EXPECT_EQ(j["a"]["sub"]["k"], false);
}

TEST(TomlTest, ErrorsNameTheLine) {
  try {
    ParseToml("a = 1\nb = \n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ParseToml("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(ParseToml("[t]\n[t]\n"), ConfigError);
  EXPECT_THROW(ParseToml("[t\n"), ConfigError);
  EXPECT_THROW(ParseToml("x = \"open\n"), ConfigError);
}

TEST(RunConfigTest, DefaultsWhenEmpty) {
  const auto cfg = ParseRunConfig("");
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_EQ(cfg.crowd.hit_size, 10);
  EXPECT_DOUBLE_EQ(cfg.crowd.approval_threshold, 0.8);
  EXPECT_EQ(cfg.trainer.minibatch_size, 256);
  EXPECT_DOUBLE_EQ(cfg.trainer.ignore_threshold, 0.9);
  EXPECT_EQ(cfg.workers.size, 30);
}

TEST(RunConfigTest, UnknownKeysAndBadTypesAreRejected) {
  EXPECT_NE(ConfigError_("[run]\nsede = 3\n").find("sede"), std::string::npos);
  EXPECT_NE(ConfigError_("[nope]\nx = 1\n").find("nope"), std::string::npos);
  EXPECT_FALSE(ConfigError_("[run]\nseed = \"one\"\n").empty());
  EXPECT_FALSE(ConfigError_("[run]\nmode = \"sideways\"\n").empty());
  EXPECT_FALSE(ConfigError_("[trainer]\nignore_threshold = 1.5\n").empty());
  EXPECT_FALSE(ConfigError_("[workers]\nspammer_fraction = 0.5\n").empty());
}

TEST(RunConfigTest, ResolvedJsonRoundTripKeepsHash) {
  const auto cfg = ParseRunConfig("[run]\nseed = 9\nmode = \"legacy_dots\"\n[crowd]\nhit_size = 6\n");
  EXPECT_EQ(cfg.mode, RunMode::kLegacyDots);
  const auto again = RunConfigFromJson(RunConfigToJson(cfg));
  EXPECT_EQ(ConfigHash(again), ConfigHash(cfg));
  EXPECT_EQ(ConfigHash(cfg).size(), 16u);
  EXPECT_NE(ConfigHash(cfg), ConfigHash(ParseRunConfig("[run]\nseed = 10\n")));
}

TEST(RunConfigTest, ShippedConfigsLoad) {
  const auto root = std::filesystem::path(REEFLABEL_SOURCE_DIR) / "configs";
  const auto ref = LoadRunConfig(root / "ref.toml");
  EXPECT_EQ(ref.mode, RunMode::kFromSeed);
  EXPECT_EQ(ref.scenario.images, 200);
  const auto legacy = LoadRunConfig(root / "legacy_dots.toml");
  EXPECT_EQ(legacy.mode, RunMode::kLegacyDots);
}

TEST(RunConfigTest, RelativeDataPathsResolveAgainstTheConfig) {
  testing::TempDir dir;
  std::ofstream(dir.path() / "c.toml") << "[data]\nhidden_world = \"data/w.json\"\n";
  const auto cfg = LoadRunConfig(dir.path() / "c.toml");
  EXPECT_EQ(std::filesystem::path(cfg.hidden_world), dir.path() / "data/w.json");
}

TEST(RunConfigTest, MissingFileIsNotFound) {
  EXPECT_THROW(LoadRunConfig("/definitely/not/here.toml"), NotFoundError);
}

}  // namespace
}  // namespace reeflabel
